use std::io::IsTerminal;
use std::process::ExitCode;

fn main() -> ExitCode {
    let color = std::io::stdout().is_terminal() && std::env::var("SVAN_COLOR").map_or(true, |v| v != "0");
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let code = svan_cli::run_styled(std::env::args_os(), color, &mut out, &mut err);
    ExitCode::from(code as u8)
}

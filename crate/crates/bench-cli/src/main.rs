use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = sg_bench::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let code = sg_bench::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}

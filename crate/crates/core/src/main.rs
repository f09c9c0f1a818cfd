use std::process::ExitCode;

fn configure_threads() {
    let Ok(value) = std::env::var("RANKCORR_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not configure {n} worker threads: {e}");
            }
        }
        Err(_) => log::warn!("ignoring RANKCORR_THREADS={value:?}: not a number"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let code = rankcorr::cli::run(std::env::args_os());
    ExitCode::from(code as u8)
}

use std::process::ExitCode;

fn main() -> ExitCode {
    match rsf_cli::run(std::env::args_os()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            // clap renders help/version and its own usage errors
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return if clap_err.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            // library errors often repeat their source in their own message
            let mut line = String::new();
            for part in err.chain().map(|e| e.to_string()) {
                if !line.contains(&part) {
                    if !line.is_empty() {
                        line.push_str(": ");
                    }
                    line.push_str(&part);
                }
            }
            eprintln!("rsf: {line}");
            ExitCode::FAILURE
        }
    }
}

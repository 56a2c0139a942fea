mod commands;
mod output;
mod params;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use params::{Params, COMMANDS};

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 2.
    Usage(String),
    /// A method missed its accuracy target; exit code 3.
    Numerical(String),
    /// Reading or writing files; exit code 1.
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<sfd_core::Error> for CliError {
    fn from(e: sfd_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SFD_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("SFD_LAB_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn execute(p: &Params) -> Result<(), CliError> {
    let format = p.choice("format", &["csv", "json"])?;
    let out = commands::run(p)?;
    let render = |r: &output::Report| match format {
        "json" => output::render_json(p, r),
        _ => output::render_csv(p, r),
    };
    let target = p.raw("output");
    if target == "-" {
        if !out.extra.is_empty() {
            return Err(CliError::Usage("extra output files need an output path".into()));
        }
        // a single Mittag-Leffler value is printed bare
        if p.command == "ml" && format == "csv" && out.main.columns[1].1.len() == 1 {
            let v = out.main.columns[1].1[0];
            if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
                println!("{v}");
            } else {
                println!("{v:e}");
            }
        } else {
            print!("{}", render(&out.main));
        }
        return Ok(());
    }
    let path = Path::new(target);
    let mut files: Vec<(PathBuf, String)> = vec![(path.to_path_buf(), render(&out.main))];
    for (suffix, r) in &out.extra {
        files.push((output::sibling(path, suffix), render(r)));
    }
    output::write_all(&files)
}

fn main() -> ExitCode {
    let matches = match params::cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let command = COMMANDS.iter().copied().find(|c| *c == name).expect("known subcommand");
    let result = configure_threads()
        .and_then(|_| params::resolve(command, sub))
        .and_then(|p| execute(&p));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sfd-lab: {e}");
            ExitCode::from(e.code())
        }
    }
}

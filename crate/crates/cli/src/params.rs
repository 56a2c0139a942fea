//! Parameter tables, config files and resolution of flags over config over defaults.

use std::fs;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::CliError;

pub const COMMANDS: [&str; 7] = ["ml", "gle-msd", "models", "calibrate", "regimes", "simulate", "fpe"];

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    /// May be given as a bare flag meaning `true`.
    pub switch: bool,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help, switch: false }
}

const fn required(name: &'static str, help: &'static str) -> Key {
    Key { name, default: None, help, switch: false }
}

const fn switch(name: &'static str, help: &'static str) -> Key {
    Key { name, default: Some("false"), help, switch: true }
}

const fn optional(name: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(""), help, switch: false }
}

const GLE: [Key; 11] = [
    key("alpha", "1", "order of the fractional inertia term (ignored when overdamped)"),
    key("gamma", "0.5", "exponent of the power-law kernel"),
    key("lambda1", "0", "weight of the delta kernel"),
    key("lambda2", "1", "weight of the power-law kernel"),
    key("kT", "1", "thermal energy"),
    key("kappa", "1", "order of the force term"),
    key("force", "auto", "force amplitude a (auto = sqrt(kT))"),
    key("v0", "auto", "initial velocity (auto = sqrt(kT))"),
    key("x0", "0", "initial position"),
    switch("overdamped", "drop the inertia term"),
    key("case", "auto", "asymptotic case: auto, 1, 2, 3, 3a, 3b"),
];

const CHANNEL: [Key; 4] = [
    key("l", "1", "lattice spacing"),
    key("theta", "0.5", "fractional occupancy"),
    key("tau", "1", "mean hopping time"),
    key("kT", "1", "thermal energy"),
];

pub fn keys(command: &str) -> Vec<Key> {
    let mut k = vec![key("output", "-", "output path (- for standard output)")];
    match command {
        "ml" => k.extend([
            key("format", "csv", "csv or json"),
            required("alpha", "first Mittag-Leffler parameter"),
            key("beta", "1", "second Mittag-Leffler parameter"),
            optional("z", "comma-separated arguments (overrides the z grid)"),
            key("z-min", "-10", "first grid argument"),
            key("z-max", "0", "last grid argument"),
            key("n", "101", "number of grid arguments"),
        ]),
        "gle-msd" => {
            k.push(key("format", "csv", "csv or json"));
            k.extend(GLE);
            k.extend([
                key("noise-exponent", "0.5", "noise exponent for case 2"),
                key("t-min", "1e-3", "first time"),
                key("t-max", "1e3", "last time"),
                key("per-decade", "10", "grid points per decade"),
            ]);
        }
        "models" => {
            k.push(key("format", "csv", "csv or json"));
            k.push(key("figure", "0", "0 for all models, 1 to 3 for the figure curves"));
            k.extend(CHANNEL);
            k.extend([
                key("beta", "2", "Mittag-Leffler family index"),
                key("lambda2", "1", "kernel weight of the three-regime model"),
                key("t-min", "1e-4", "first time"),
                key("t-max", "1e6", "last time"),
                key("per-decade", "20", "grid points per decade"),
            ]);
        }
        "calibrate" => {
            k.push(key("format", "json", "json"));
            k.extend(CHANNEL);
            k.push(key("beta", "2", "Mittag-Leffler family index"));
        }
        "regimes" => k.extend([
            key("format", "csv", "csv or json"),
            required("input", "CSV file with a t column"),
            optional("column", "value column (default: second column)"),
            key("targets", "2,1,0.5", "comma-separated target exponents"),
            key("tol", "0.05", "tolerance on the local exponent"),
        ]),
        "simulate" => {
            k.push(key("format", "csv", "csv or json"));
            k.extend(GLE.iter().copied().filter(|k| k.name != "case"));
            k.extend([
                key("dt", "1e-2", "time step"),
                key("n-steps", "1000", "steps per path"),
                key("n-paths", "1000", "number of paths"),
                key("seed", "1", "random seed"),
                key("method", "auto", "convolution: auto, fft or direct"),
                key("stride", "1", "write every stride-th step"),
                key("reference", "true", "add the analytic MSD column"),
            ]);
        }
        "fpe" => k.extend([
            key("format", "csv", "csv or json"),
            key("D0", "1", "short-time diffusion coefficient"),
            key("F", "1", "single-file mobility (inf for constant D)"),
            key("variant", "matched", "matched or paper"),
            key("half-width", "auto", "half width of the domain (auto = sized from the final width)"),
            key("nx", "auto", "number of cells (auto = 40 cells per initial width)"),
            key("sigma0", "1", "width of the initial Gaussian"),
            key("step-eps", "2e-3", "step rule ds = eps (sigma0^2 + 2 s)"),
            optional("t", "comma-separated output times (overrides the grid)"),
            key("t-min", "1", "first output time"),
            key("t-max", "100", "last output time"),
            key("per-decade", "5", "output times per decade"),
            switch("snapshots", "also write density files, one per output time"),
        ]),
        _ => unreachable!("unknown command {command}"),
    }
    k
}

pub fn cli() -> Command {
    let mut app = Command::new("sfd-lab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Fractional Langevin models of single-file diffusion")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for name in COMMANDS {
        let mut sub = Command::new(name).about(about(name)).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value file, or an earlier output to re-run"),
        );
        for k in keys(name) {
            let mut arg = Arg::new(k.name).long(k.name).help(k.help).action(ArgAction::Set);
            if k.switch {
                arg = arg.num_args(0..=1).default_missing_value("true").value_name("BOOL");
            } else {
                arg = arg.value_name("VALUE").allow_hyphen_values(true);
            }
            sub = sub.arg(arg);
        }
        app = app.subcommand(sub);
    }
    app
}

fn about(name: &str) -> &'static str {
    match name {
        "ml" => "Evaluate the Mittag-Leffler function",
        "gle-msd" => "MSD of the fractional Langevin model with its asymptotic laws",
        "models" => "Closed-form single-file MSD models and figure curves",
        "calibrate" => "Channel parameters to D0, F and the family constants",
        "regimes" => "Local exponents and regime intervals of an MSD file",
        "simulate" => "Monte Carlo ensemble MSD",
        "fpe" => "Solve the effective Fokker-Planck equation",
        _ => "",
    }
}

/// Fully resolved parameters of one run, in table order.
#[derive(Debug, Clone)]
pub struct Params {
    pub command: &'static str,
    pub values: Vec<(&'static str, String)>,
}

pub fn resolve(command: &'static str, m: &ArgMatches) -> Result<Params, CliError> {
    let table = keys(command);
    let mut values: Vec<(&'static str, Option<String>)> =
        table.iter().map(|k| (k.name, k.default.map(str::to_string))).collect();
    if let Some(path) = m.get_one::<String>("config") {
        for (k, v) in read_config(Path::new(path), command)? {
            let slot = values
                .iter_mut()
                .find(|(name, _)| *name == k)
                .ok_or_else(|| CliError::Usage(format!("{path}: unknown key '{k}' for {command}")))?;
            slot.1 = Some(v);
        }
    }
    for (name, slot) in values.iter_mut() {
        if m.value_source(name) == Some(ValueSource::CommandLine) {
            *slot = m.get_one::<String>(name).cloned();
        }
    }
    let values = values
        .into_iter()
        .map(|(name, v)| {
            v.map(|v| (name, v.trim().to_string()))
                .ok_or_else(|| CliError::Usage(format!("missing required parameter '{name}'")))
        })
        .collect::<Result<_, _>>()?;
    Ok(Params { command, values })
}

/// Reads `key=value` lines. An earlier output file is accepted too: its echoed
/// config is taken from the CSV header or the JSON `config` array.
fn read_config(path: &Path, command: &str) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let lines: Vec<String> = if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        v.get("config")
            .and_then(|c| c.as_array())
            .ok_or_else(|| CliError::Usage(format!("{}: no config array", path.display())))?
            .iter()
            .filter_map(|s| s.as_str().map(str::to_string))
            .collect()
    } else if text.starts_with(crate::output::BANNER) {
        text.lines()
            .skip(1)
            .take_while(|l| l.starts_with("# ") && *l != crate::output::SEPARATOR)
            .map(|l| l[2..].to_string())
            .collect()
    } else {
        text.lines().map(str::to_string).collect()
    };
    let mut out = Vec::new();
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k == "command" {
            if v != command {
                return Err(CliError::Usage(format!(
                    "{}: config is for '{v}', not '{command}'",
                    path.display()
                )));
            }
            continue;
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl Params {
    pub fn raw(&self, name: &str) -> &str {
        self.values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("parameter '{name}' not in the table"))
    }

    fn bad(&self, name: &str, what: &str) -> CliError {
        CliError::Usage(format!("parameter '{name}' = '{}': expected {what}", self.raw(name)))
    }

    pub fn f64(&self, name: &str) -> Result<f64, CliError> {
        parse_f64(self.raw(name)).ok_or_else(|| self.bad(name, "a number"))
    }

    /// `None` for `auto`.
    pub fn f64_or_auto(&self, name: &str) -> Result<Option<f64>, CliError> {
        if self.raw(name) == "auto" {
            return Ok(None);
        }
        self.f64(name).map(Some)
    }

    pub fn usize(&self, name: &str) -> Result<usize, CliError> {
        self.raw(name).parse().map_err(|_| self.bad(name, "a nonnegative integer"))
    }

    pub fn u64(&self, name: &str) -> Result<u64, CliError> {
        self.raw(name).parse().map_err(|_| self.bad(name, "a nonnegative integer"))
    }

    pub fn bool(&self, name: &str) -> Result<bool, CliError> {
        match self.raw(name) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(self.bad(name, "true or false")),
        }
    }

    /// Empty for an empty value.
    pub fn list(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.raw(name);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| parse_f64(s.trim()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.bad(name, "comma-separated numbers"))
    }

    pub fn choice<'a>(&self, name: &str, options: &[&'a str]) -> Result<&'a str, CliError> {
        let v = self.raw(name);
        options
            .iter()
            .find(|o| **o == v)
            .copied()
            .ok_or_else(|| self.bad(name, &format!("one of {}", options.join(", "))))
    }

    /// `key=value` lines for the provenance header, without the output path.
    pub fn echo(&self) -> Vec<String> {
        std::iter::once(format!("command={}", self.command))
            .chain(
                self.values
                    .iter()
                    .filter(|(k, _)| *k != "output")
                    .map(|(k, v)| format!("{k}={v}")),
            )
            .collect()
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

//! Process specifications such as `ar1:phi=0.5` or `ma:q=2,w=1,1,1`.

use std::collections::BTreeMap;

use uquant_core::processes::{Innovation, ProcessModel, GAUSS_DEFAULT_BURN_IN};

use crate::error::{CliError, CliResult};

/// Splits `name:key=v,key=v1,v2` into the name and its arguments. Bare
/// comma-separated items extend the preceding key, so `w=1,1,1` is one
/// list-valued argument.
fn split_spec(spec: &str) -> CliResult<(&str, BTreeMap<&str, Vec<&str>>)> {
    let (name, rest) = match spec.split_once(':') {
        Some((name, rest)) => (name.trim(), rest),
        None => (spec.trim(), ""),
    };
    let mut args: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('=') {
            Some((k, v)) => {
                let k = k.trim();
                if args.insert(k, vec![v.trim()]).is_some() {
                    return Err(CliError::usage(format!(
                        "process `{name}`: key `{k}` given twice"
                    )));
                }
                current = Some(k);
            }
            None => match current {
                Some(k) => args.get_mut(k).expect("key inserted").push(item),
                None => {
                    return Err(CliError::usage(format!(
                        "process `{name}`: expected key=value, found `{item}`"
                    )))
                }
            },
        }
    }
    Ok((name, args))
}

struct Args<'a> {
    process: &'a str,
    map: BTreeMap<&'a str, Vec<&'a str>>,
}

impl<'a> Args<'a> {
    fn take(&mut self, key: &str) -> Option<Vec<&'a str>> {
        self.map.remove(key)
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        let Some(values) = self.take(key) else {
            return Ok(None);
        };
        match values.as_slice() {
            [v] => v.parse().map(Some).map_err(|_| {
                CliError::usage(format!(
                    "process `{}`: `{key}={v}` is not a valid number",
                    self.process
                ))
            }),
            _ => Err(CliError::usage(format!(
                "process `{}`: `{key}` takes a single value",
                self.process
            ))),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<T> {
        self.number(key)?
            .ok_or_else(|| CliError::usage(format!("process `{}` requires `{key}=`", self.process)))
    }

    fn finish(self) -> CliResult<()> {
        match self.map.keys().next() {
            Some(k) => Err(CliError::usage(format!(
                "process `{}`: unknown key `{k}`",
                self.process
            ))),
            None => Ok(()),
        }
    }
}

fn parse_innovation(text: &str) -> CliResult<Innovation> {
    let lower = text.to_ascii_lowercase();
    if lower == "rademacher" {
        return Ok(Innovation::Rademacher);
    }
    if let Some(inner) = lower
        .strip_prefix("poisson(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let lambda: f64 = inner
            .parse()
            .map_err(|_| CliError::usage(format!("innovation `{text}`: bad rate")))?;
        return Ok(Innovation::Poisson { lambda });
    }
    Err(CliError::usage(format!(
        "unknown innovation `{text}` (expected rademacher or poisson(λ))"
    )))
}

/// Builds the process named by `spec`. Generator preconditions are usage
/// errors here, since they come straight from the command line.
pub fn parse_process(spec: &str) -> CliResult<ProcessModel> {
    let (name, map) = split_spec(spec)?;
    let mut args = Args { process: name, map };
    let as_usage = |e: uquant_core::Error| CliError::usage(format!("process `{spec}`: {e}"));
    let model = match name {
        "iid" => ProcessModel::iid_normal(),
        "ar1" => ProcessModel::ar1_gaussian(args.required("phi")?).map_err(as_usage)?,
        "ma" => {
            let q: usize = args.required("q")?;
            let weights = match args.take("w") {
                Some(ws) => ws
                    .iter()
                    .map(|w| {
                        w.parse::<f64>().map_err(|_| {
                            CliError::usage(format!("process `ma`: weight `{w}` is not a number"))
                        })
                    })
                    .collect::<CliResult<Vec<_>>>()?,
                None => vec![1.0; q + 1],
            };
            ProcessModel::ma_q(q, &weights).map_err(as_usage)?
        }
        "lin" => {
            let a: f64 = args.required("a")?;
            let innovation = match args.take("inn") {
                Some(v) => parse_innovation(&v.join(","))?,
                None => Innovation::Rademacher,
            };
            ProcessModel::linear_discrete(a, innovation).map_err(as_usage)?
        }
        "gauss" => ProcessModel::gauss_map(args.number("burn")?.unwrap_or(GAUSS_DEFAULT_BURN_IN)),
        "const" => ProcessModel::constant(args.required("value")?),
        other => {
            return Err(CliError::usage(format!(
                "unknown process `{other}` (expected iid, ar1, ma, lin, gauss or const)"
            )))
        }
    };
    args.finish()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uquant_core::processes::Dependence;

    #[test]
    fn parses_documented_specs() {
        assert_eq!(parse_process("iid").unwrap().dependence(), Dependence::Iid);
        let ar = parse_process("ar1:phi=0.5").unwrap();
        assert_eq!(ar.params()["phi"], 0.5);
        let ma = parse_process("ma:q=2,w=1,1,1").unwrap();
        assert_eq!(ma.dependence(), Dependence::MDependent { lag: 2 });
        assert!(parse_process("lin:a=4,inn=rademacher").is_ok());
        assert!(parse_process("lin:a=4,inn=poisson(2)").is_ok());
        assert!(parse_process("gauss").is_ok());
        assert!(parse_process("gauss:burn=10").is_ok());
        assert!(parse_process("const:value=1").is_ok());
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            "ar1:phi=1.2",
            "ar1",
            "ar1:phi=x",
            "ar1:phi=0.5,psi=1",
            "ma:q=2,w=1,1",
            "lin:a=4,inn=cauchy",
            "nope",
            "ar1:0.5",
            "ar1:phi=0.1,phi=0.2",
        ] {
            assert!(
                matches!(parse_process(bad), Err(CliError::Usage(_))),
                "{bad}"
            );
        }
    }
}

use std::fs;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use coagem_core::ClusterDistribution;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

/// Tolerance on the sum of the fractions given with `--init`.
pub const INIT_SUM_TOL: f64 = 1e-9;

/// Overlays the JSON object in `path` on `parsed`. Keys are the option names
/// with underscores (`t_end`, `record_dt`); options given explicitly on the
/// command line keep their values.
pub fn merge_config<T: Serialize + DeserializeOwned>(
    parsed: T,
    matches: &ArgMatches,
    path: Option<&Path>,
) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(parsed);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let overrides: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not a JSON object: {e}", path.display())))?;
    let mut value = serde_json::to_value(&parsed).expect("options serialize");
    let fields = value.as_object_mut().expect("options are a struct");
    for (key, v) in overrides {
        if !fields.contains_key(&key) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        if matches.value_source(&key) != Some(ValueSource::CommandLine) {
            fields.insert(key, v);
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses `dimer`, `kmer:<k>` or `<size>:<fraction>,...`.
pub fn parse_init(spec: &str, ell: usize) -> Result<ClusterDistribution, CliError> {
    let bad = |msg: String| CliError::Config(format!("--init {spec:?}: {msg}"));
    let spec = spec.trim();
    let pairs: Vec<(usize, f64)> = if spec == "dimer" {
        vec![(2, 1.0)]
    } else if let Some(k) = spec.strip_prefix("kmer:") {
        let k: usize = k.parse().map_err(|_| bad(format!("`{k}` is not a size")))?;
        vec![(k, 1.0)]
    } else {
        spec.split(',')
            .map(|item| {
                let (n, v) = item
                    .split_once(':')
                    .ok_or_else(|| bad(format!("`{item}` is not <size>:<fraction>")))?;
                let n: usize = n
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("`{n}` is not a size")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("`{v}` is not a number")))?;
                Ok((n, v))
            })
            .collect::<Result<_, CliError>>()?
    };
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if !total.is_finite() || (total - 1.0).abs() > INIT_SUM_TOL {
        return Err(bad(format!("fractions sum to {total}, not 1")));
    }
    ClusterDistribution::initial(ell, pairs.into_iter().map(|(n, v)| (n, v / total)))
        .map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_grammar() {
        let u = parse_init("dimer", 1).unwrap();
        assert_eq!(u.get(2), 1.0);
        assert_eq!(parse_init("kmer:5", 2).unwrap().get(5), 1.0);
        let u = parse_init("1:0.5, 2:0.3,3:0.2", 3).unwrap();
        assert_eq!((u.get(1), u.get(2), u.get(3)), (0.5, 0.3, 0.2));
        assert!(parse_init("1:0.5,2:0.3000000001,3:0.2", 3).is_ok());
        for bad in [
            "1:0.5,2:0.3",
            "kmer:x",
            "2",
            "0:1",
            "1:-0.5,2:1.5",
            "trimer",
        ] {
            assert!(parse_init(bad, 1).is_err(), "{bad}");
        }
    }
}

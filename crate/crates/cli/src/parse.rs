//! Flag value mini-languages: sweep grids and baseline pipeline configs.

use maxsim_core::candidates::Strategy;
use maxsim_core::rerank::PipelineConfig;

/// Grid spec: comma-separated values or inclusive `start:stop:step` ranges,
/// e.g. "10,20,50,100:1000:100,1000:5000:500". The result is sorted and
/// deduplicated, so overlapping segments are harmless.
pub fn parse_grid(spec: &str) -> Result<Vec<usize>, String> {
    let mut grid = Vec::new();
    for segment in spec.split(',') {
        let segment = segment.trim();
        if segment.is_empty() {
            return Err(format!("empty segment in grid spec '{spec}'"));
        }
        let parts: Vec<&str> = segment.split(':').collect();
        match parts.as_slice() {
            [one] => grid.push(parse_point(one)?),
            [start, stop, step] => {
                let (start, stop, step) =
                    (parse_point(start)?, parse_point(stop)?, parse_point(step)?);
                if step == 0 {
                    return Err(format!("zero step in grid segment '{segment}'"));
                }
                if start > stop {
                    return Err(format!("descending grid segment '{segment}'"));
                }
                grid.extend((start..=stop).step_by(step));
            }
            _ => {
                return Err(format!(
                    "grid segment '{segment}' is neither a value nor start:stop:step"
                ))
            }
        }
    }
    grid.sort_unstable();
    grid.dedup();
    Ok(grid)
}

fn parse_point(s: &str) -> Result<usize, String> {
    let v: usize = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a non-negative integer"))?;
    if v == 0 {
        return Err(format!("grid values must be positive, got '{s}'"));
    }
    Ok(v)
}

pub fn parse_strategy(name: &str) -> Result<Strategy, String> {
    match name {
        "kprime" => Ok(Strategy::Kprime),
        "count" => Ok(Strategy::Count),
        "sumsim" => Ok(Strategy::SumSim),
        "maxsim" => Ok(Strategy::MaxSim),
        other => Err(format!(
            "unknown strategy '{other}' (valid: kprime, count, sumsim, maxsim)"
        )),
    }
}

/// Baseline config: comma-separated key=value pairs over the pipeline
/// fields, e.g. "strategy=maxsim,kprime=500,nprobe=8,k=200,depth=1000".
/// Unset keys keep the default end-to-end configuration.
pub fn parse_baseline_config(spec: &str) -> Result<PipelineConfig, String> {
    let mut cfg = PipelineConfig::default();
    if spec.trim().is_empty() {
        return Ok(cfg);
    }
    for pair in spec.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("baseline entry '{pair}' is not key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        let positive = |what: &str| -> Result<usize, String> {
            let v: usize = value
                .parse()
                .map_err(|_| format!("baseline {what} '{value}' is not an integer"))?;
            if v == 0 {
                return Err(format!("baseline {what} must be positive"));
            }
            Ok(v)
        };
        match key {
            "strategy" => cfg.strategy = parse_strategy(value)?,
            "kprime" => cfg.k_prime = positive("kprime")?,
            "nprobe" => cfg.nprobe = positive("nprobe")?,
            "k" => cfg.k = Some(positive("k")?),
            "depth" => cfg.final_depth = positive("depth")?,
            other => {
                return Err(format!(
                    "unknown baseline key '{other}' (valid: strategy, kprime, nprobe, k, depth)"
                ))
            }
        }
    }
    if cfg.strategy == Strategy::Kprime && cfg.k.is_some() {
        return Err("baseline: k cannot be combined with the kprime strategy".into());
    }
    Ok(cfg)
}

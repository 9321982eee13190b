pub mod bandwidth;
pub mod experiment;
pub mod inspect;
pub mod mask_eval;
pub mod refine;
pub mod sample;
pub mod synth;
pub mod train;

use facecloud_core::sampling::MaskSpec;

use crate::error::{AppError, AppResult};

/// Parses `glasses`, `hmd`, `full` or `box:x0,x1,y0,y1,z0,z1`.
pub fn parse_mask(s: &str) -> AppResult<MaskSpec> {
    let spec = match s.trim() {
        "glasses" => MaskSpec::GLASSES,
        "hmd" => MaskSpec::HMD,
        "full" => MaskSpec::FULL,
        other => {
            let body = other
                .strip_prefix("box:")
                .ok_or_else(|| AppError::Config(format!("unknown mask `{other}`")))?;
            let v: Vec<f64> = body
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| AppError::Config(format!("mask `{other}`: {e}")))?;
            if v.len() != 6 {
                return Err(AppError::Config(format!("mask `{other}` needs six fractions")));
            }
            MaskSpec::CustomBox { min: [v[0], v[2], v[4]], max: [v[1], v[3], v[5]] }
        }
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_presets() {
        assert_eq!(parse_mask("glasses").unwrap(), MaskSpec::GLASSES);
        assert_eq!(parse_mask("hmd").unwrap(), MaskSpec::HMD);
        assert_eq!(
            parse_mask("box:0,0.5,0.1,1,0,1").unwrap(),
            MaskSpec::CustomBox { min: [0.0, 0.1, 0.0], max: [0.5, 1.0, 1.0] }
        );
        assert_eq!(parse_mask("box:0,1,0,1").unwrap_err().exit_code(), 2);
        assert_eq!(parse_mask("box:0.6,0.5,0,1,0,1").unwrap_err().exit_code(), 2);
        assert!(parse_mask("visor").is_err());
    }
}

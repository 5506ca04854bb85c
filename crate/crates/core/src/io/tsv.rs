//! Tab-separated outputs with six significant digits.

use std::io::Write;

use crate::training::TrainLog;

/// Format a number with six significant digits, dropping trailing zeros
/// and switching to exponent notation outside `[1e-4, 1e6)`.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        format!("{}e{exp}", trim(mantissa))
    } else {
        trim(&format!("{x:.*}", (5 - exp).max(0) as usize))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt6)
}

/// Training log rows. The `exact_log_likelihood` column only appears for
/// exact-gradient runs; absent regularizer statistics are written as `NA`.
pub fn write_log<W: Write>(out: &mut W, log: &TrainLog) -> std::io::Result<()> {
    let exact = log.epochs.iter().any(|e| e.exact_log_likelihood.is_some());
    write!(out, "epoch\trecon_error\tmean_group_norm\tintra_kl\tinter_kl")?;
    if exact {
        write!(out, "\texact_log_likelihood")?;
    }
    writeln!(out)?;
    for e in &log.epochs {
        write!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.epoch,
            fmt6(e.recon_error),
            opt(e.mean_group_norm),
            opt(e.intra_kl),
            opt(e.inter_kl)
        )?;
        if exact {
            write!(out, "\t{}", opt(e.exact_log_likelihood))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

//! Escape functions for the cat map: orders along the dual directions and decay along the flow.
use ruelle::escape::{fitted_decay_rate, order_estimate, predicted_order, DirectionKind, DualCoords, DualSplitting, EscapeConfig};
use ruelle::MetricParams;

fn main() -> ruelle::Result<()> {
    let split = DualSplitting::cat_map();
    let p = MetricParams::new(1.0, 0.5, 0.0)?;
    let cfg = EscapeConfig::symmetric(2.0, 0.0);
    println!("lambda = {:.4}", split.lambda);
    for kind in [DirectionKind::Flow, DirectionKind::Unstable, DirectionKind::Stable, DirectionKind::Transverse] {
        let fit = order_estimate(&kind.representative(), &split, &cfg, &p)?;
        println!("{kind:?}: order {fit:.3} (predicted {:.3})", predicted_order(kind, &cfg, &p));
    }
    let start = DualCoords::new(1024.0, 0.0, 0.0);
    println!(
        "decay rate from an unstable covector: {:.4} (Lambda = {:.4})",
        fitted_decay_rate(&start, 8.0, &split, &cfg, &p)?,
        cfg.decay_rate(&split, &p)
    );
    Ok(())
}

//! Runs a bundled scenario and compares the report with the planted truth.
//!
//! cargo run --release -p eagleeye --example benchmark -- gauss7x3 500

use std::time::Instant;

use eagleeye::synthetic::{evaluate_against_truth, generate, preset};
use eagleeye::{run, Direction, EagleEyeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "gauss7x3".into());
    let k_max: usize = args.next().map_or(Ok(500), |s| s.parse())?;

    let spec = preset(&name)?;
    let scenario = generate(&spec)?;
    let config = EagleEyeConfig::with_k_max(k_max);
    let start = Instant::now();
    let result = run(&scenario.reference, &scenario.test, &config)?;
    println!("{name}: pipeline took {:.1?}", start.elapsed());

    for d in Direction::BOTH {
        let dir = result.direction(d);
        let (_, truth) = scenario.sample(d.scanned());
        let eval = evaluate_against_truth(&dir.report, &dir.partition, truth);
        println!(
            "\n{d}: threshold {:.3}, flagged {}, pruned {}, clusters {}, ide iterations {}",
            dir.null_model.threshold,
            dir.partition.flagged.len(),
            dir.partition.pruned.len(),
            dir.report.clusters.len(),
            dir.ide_iterations,
        );
        for (c, t) in dir.report.clusters.iter().zip(&eval.clusters) {
            println!(
                "  cluster {:>2}: flagged {:>5} pruned {:>5} members {:>5} injected {:>4} \
                 purity {:>6} (true {:>5}) matched {:?}",
                c.alpha,
                c.flagged.len(),
                c.pruned_count,
                c.members.len(),
                c.injected.len(),
                fmt(c.estimates.purity),
                fmt(t.true_purity),
                t.matched,
            );
        }
        for a in &eval.anomalies {
            println!(
                "  anomaly {}: planted {:>4} flagged {:>4} pruned {:>4} recovered {:>4} recall {}",
                a.anomaly,
                a.planted,
                a.flagged_signal,
                a.pruned_signal,
                a.recovered_signal,
                fmt(a.recall),
            );
        }
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

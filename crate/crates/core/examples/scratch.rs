use farmtest::config::MethodTag;
use farmtest::sim::{run_experiment, ErrorLaw, Model, Scenario};

fn main() {
    let methods = [
        MethodTag::FarmH,
        MethodTag::FarmU,
        MethodTag::Fam,
        MethodTag::Naive,
        MethodTag::Oracle,
    ];
    for error in [ErrorLaw::T3, ErrorLaw::Normal] {
        let sc = Scenario {
            model: Model::M1,
            error,
            n: 100,
            p: 100,
            p1: 25,
            signal: 0.5,
            k: 3,
            seed: 20240501,
        };
        let report = run_experiment(&sc, &methods, 100, 0.05, 0.01, 0.0).unwrap();
        println!("=== {error:?} p1=25 n=100");
        for s in &report.summaries {
            println!(
                "{:8} medRAE={:<10} skip={:2} pow_t={:.3} FDPa={:.3}",
                s.method.to_string(),
                s.median_rae.map(|r| format!("{:.4}", r)).unwrap_or("-".into()),
                s.rae_skipped,
                s.mean_power_t,
                s.mean_empirical_fdp_alpha,
            );
        }
    }
    let short = [MethodTag::FarmH, MethodTag::FarmU, MethodTag::Naive];
    for n in [100usize, 150, 200] {
        for error in [ErrorLaw::T3, ErrorLaw::Normal, ErrorLaw::Gamma, ErrorLaw::Lognormal] {
            let sc = Scenario {
                model: Model::M1,
                error,
                n,
                p: 100,
                p1: 25,
                signal: 0.5,
                k: 3,
                seed: 20240501,
            };
            let report = run_experiment(&sc, &short, 100, 0.05, 0.01, 0.0).unwrap();
            print!("crit6 n={n:3} {error:?}: ");
            for s in &report.summaries {
                print!("{}={:.3} ", s.method.to_string(), s.mean_empirical_fdp_alpha);
            }
            println!();
        }
    }
}

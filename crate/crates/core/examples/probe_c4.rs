use surveymix::em::{fit, run_em, FitConfig};
use surveymix::mixture::{log_likelihood, MixtureModel};
use surveymix::selection::sweep_k;
use surveymix::synth::{sample, GeneratorSpec};

fn main() {
    let t4 = MixtureModel::new(
        vec![0.13, 0.58, 0.29],
        vec![vec![1.5, 3.2], vec![3.7, 4.2], vec![5.5, 6.2]],
        vec![vec![1.7, 2.0], vec![1.9, 1.3], vec![1.4, 1.0]],
    ).unwrap();
    for disc in [false, true] {
        for seed in 0..3 {
            let mut spec = GeneratorSpec::new(t4.clone(), 5914, 100 + seed);
            if disc { spec = spec.discretized(); }
            let data = sample(&spec).unwrap().data;
            let cfg = FitConfig::new(1).with_floor(1.0).with_seed(seed);
            let rep = sweep_k(&data, 2, 5, &cfg).unwrap();
            let aics: Vec<String> = rep.entries.iter().map(|e| format!("k{}={:.1}", e.k, e.aic.unwrap())).collect();
            let truth_lnl = log_likelihood(&data, &t4).unwrap();
            let from_truth = run_em(&data, t4.clone(), &FitConfig::new(3).with_floor(1.0)).unwrap();
            let f3 = fit(&data, &FitConfig::new(3).with_floor(1.0).with_seed(seed)).unwrap();
            println!("disc={disc} seed={seed} {} | truth lnL {truth_lnl:.1}, EM from truth {:.1}, fit3 {:.1}", aics.join(" "), from_truth.log_likelihood, f3.criterion.log_likelihood);
            if disc && seed == 0 {
                let f4 = fit(&data, &FitConfig::new(4).with_floor(1.0).with_seed(seed)).unwrap();
                println!("k4 model: {:?}", f4.model);
                println!("k3 model: {:?}", f3.model);
            }
        }
    }
}

mod common;
use rgcnet::data::{simulate_longitudinal, SimulatorParams};
use rgcnet::generate::{composite_loss, composite_loss_var, identity_baseline, GeneratorConfig, GeneratorModel, GeneratorVariant};
use rgcnet::autodiff::{Optimizer, Tape};
use rgcnet::metrics;

#[test]
fn probe_generation_training() {
    let params = SimulatorParams::structured(20, 35, 3, 0.5, 0.05, 5);
    let ds = simulate_longitudinal(&params).unwrap();
    let pairs = ds.transition_pairs();
    let (train, test): (Vec<_>, Vec<_>) = pairs.iter().partition(|(i, _)| ds.graphs[*i].subject.unwrap() < 15);
    let mut cfg = GeneratorConfig::for_nodes(35, 8);
    cfg.variant = GeneratorVariant::Rgc;
    cfg.seed = 0;
    let mut model = GeneratorModel::new(cfg).unwrap();
    let mut opt = Optimizer::adam();
    let mut accum = model.store.grad_buffers();
    let lambda = (1.0, 1.0, 1.0);
    for epoch in 0..40 {
        let mut loss_sum = 0.0;
        for &(i, j) in &train {
            let tape = Tape::new();
            let bound = model.store.bind(&tape);
            let pred = model.forward_var(&bound, &ds.graphs[i], &tape, true).unwrap();
            let loss = composite_loss_var(&ds.graphs[j].adjacency, &pred, lambda).unwrap();
            loss_sum += loss.scalar().unwrap();
            loss.backward().unwrap();
            model.store.accumulate_grads(&bound, &mut accum, 1.0 / train.len() as f64).unwrap();
        }
        model.store.apply_step(&mut opt, &mut accum, 0.01).unwrap();
        if epoch % 5 == 0 || epoch == 39 {
            let mut test_mae = 0.0;
            let mut id_mae = 0.0;
            for &(i, j) in &test {
                let pred = model.predict_next(&ds.graphs[i]).unwrap();
                test_mae += metrics::mae(&ds.graphs[j].adjacency, &pred).unwrap();
                id_mae += metrics::mae(&ds.graphs[j].adjacency, &identity_baseline(&ds.graphs[i])).unwrap();
            }
            println!("epoch {epoch}: train_loss {:.4}  test_mae {:.5}  identity_mae {:.5}",
                loss_sum / train.len() as f64, test_mae / test.len() as f64, id_mae / test.len() as f64);
        }
    }
    let _ = composite_loss;
}

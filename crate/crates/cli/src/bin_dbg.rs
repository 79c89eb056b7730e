use shallowfuse_core::rnnlm::*;
use shallowfuse_core::vocab::UnitId;

fn main() {
    let a = UnitId(3);
    let b = UnitId(4);
    let sentence: Vec<UnitId> = (0..12).map(|i| if i % 2 == 0 { a } else { b }).collect();
    let params = init_params(5, 8, 16, 1, 2).unwrap();
    let config = TrainConfig { epochs: 60, learning_rate: 0.5, bptt_len: 16, seed: 3 };
    let (trained, report) = train(&params, &[sentence.clone()], &config).unwrap();
    println!("epoch nll: first {:?} last {:?}", report.epoch_nll.first(), report.epoch_nll.last());
    let state = RnnState::zeros(&trained);
    let (lp0, s1) = forward_step(&trained, &state, UnitId(0)).unwrap();
    println!("P(.|<s>) = {:?}", lp0.iter().map(|l| l.exp()).collect::<Vec<_>>());
    let (lp1, _) = forward_step(&trained, &s1, a).unwrap();
    println!("P(.|<s> a) = {:?}", lp1.iter().map(|l| l.exp()).collect::<Vec<_>>());
    let ppl = perplexity(&trained, &[sentence]).unwrap();
    println!("ppl {}", ppl);
}

//! Build a tiny conv + linear model on a tape, backpropagate, take ADADELTA
//! steps, then run the finite-difference gradient suite.

use deepstreet_tensor::reference::gradcheck;
use deepstreet_tensor::{AdadeltaConfig, AdadeltaState, ConvGeometry, Tape, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let input = Tensor::new([1, 1, 4, 4], (0..16).map(|i| i as f32 / 16.0).collect())?;
    let mut kernel = Tensor::new([2, 1, 3, 3], vec![0.1; 18])?;
    let mut weights = Tensor::new([32, 1], vec![0.01; 32])?;
    let mut k_state = AdadeltaState::new(kernel.numel(), AdadeltaConfig::default())?;
    let mut w_state = AdadeltaState::new(weights.numel(), AdadeltaConfig::default())?;

    for step in 0..5 {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let k = tape.param(kernel.clone());
        let w = tape.param(weights.clone());
        let h = tape.conv2d(x, k, None, ConvGeometry::new(1, 1, 1))?;
        let h = tape.relu(h);
        let flat = tape.reshape(h, [1, 32])?;
        let logit = tape.linear(flat, w, None)?;
        let p = tape.sigmoid(logit);
        let loss = tape.bce(p, &[1.0])?;
        println!("step {step}: loss {:.6}", tape.value(loss).item());
        let grads = tape.backward(loss)?;
        k_state.step(kernel.data_mut(), grads.get(k).unwrap())?;
        w_state.step(weights.data_mut(), grads.get(w).unwrap())?;
    }

    for check in gradcheck::run_suite(7) {
        println!("{:<36} relative error {:.2e}", check.name, check.rel_err);
    }
    Ok(())
}

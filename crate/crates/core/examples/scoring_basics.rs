//! Peer-prediction scoring on a five-agent panel with one informed agent.
//!
//! The crowd expects everyone to agree with it; the informed agent predicts
//! the crowd correctly and so earns the higher score.

use acemad::dynamics::{mwu_update, WeightVector};
use acemad::{normalize, peer_average, score_round, Belief};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let crowd = normalize(&[0.1, 0.9])?;
    let informed = normalize(&[0.9, 0.1])?;
    let mut beliefs = vec![crowd.clone(); 4];
    beliefs.push(informed);

    // crowd members forecast their own view; the informed agent forecasts
    // what the other four believe
    let mut predictions: Vec<Belief> = beliefs[..4].to_vec();
    predictions.push(peer_average(&beliefs, 4)?);

    let scores = score_round(&beliefs, &predictions)?;
    println!("scores: {scores:.4?}");

    let mut w = WeightVector::uniform(beliefs.len());
    for round in 1..=3 {
        w = mwu_update(&w, &scores, 2.0)?;
        println!("after round {round}: informed weight {:.4}", w.weights()[4]);
    }
    Ok(())
}

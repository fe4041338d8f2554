use otdenoise::denoiser::{
    check_gradient, forward, loss_and_grad, minibatch_w1, w1_subgradient, Critic, DenoiserParams, GradCheck, LossSpec, NetSpec, OptimizerSettings,
    RmsProp,
};
use otdenoise::image::ImagePatch;
use otdenoise::rng::rng_from_seed;
use rand::Rng as _;

fn batch(rng: &mut otdenoise::rng::Rng, b: usize, n: usize) -> Vec<ImagePatch<f64>> {
    (0..b).map(|_| ImagePatch::from_fn(n, n, |_, _| rng.random::<f64>())).collect()
}

fn nets() -> Vec<NetSpec> {
    vec![NetSpec::toy(), NetSpec::encoder_decoder(4, 8), NetSpec::encoder_decoder(2, 3)]
}

fn check_net(seed: u64, spec: NetSpec, loss: &LossSpec) -> GradCheck {
    let mut rng = rng_from_seed(seed);
    let params = DenoiserParams::<f64>::random(spec, seed);
    let noisy = batch(&mut rng, 4, 8);
    let clean = batch(&mut rng, 4, 8);
    check_gradient(&params, loss, &noisy, &clean, 1e-4, 1e-6).unwrap()
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let mut rng = rng_from_seed(77);
    let mut total = 0;
    let mut kinked = 0;
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let spec = nets()[i as usize % 3].clone();
        let lambda = rng.random_range(0.5..5.0);
        let c = check_net(1000 + i, spec, &LossSpec::relaxed(lambda));
        println!(
            "net {i}: {} coordinates, {} across a kink, worst relative error {:.2e}",
            c.checked, c.kinked, c.worst_relative_error
        );
        total += c.checked;
        kinked += c.kinked;
        worst = worst.max(c.worst_relative_error);
    }
    assert!(total > 1000);
    assert!(kinked * 100 <= total, "{kinked} kinked of {total}");
    assert!(worst < 1e-3, "worst relative error {worst:e}");
}

#[test]
fn supervised_and_dist_only_gradients() {
    for (i, loss) in [LossSpec::supervised(), LossSpec::dist_only()].into_iter().enumerate() {
        let c = check_net(50 + i as u64, NetSpec::encoder_decoder(2, 3), &loss);
        assert!(c.checked > 10);
        assert!(c.worst_relative_error < 1e-3, "{:?}: {:e}", loss.objective, c.worst_relative_error);
    }
}

#[test]
fn envelope_step_does_not_increase_loss() {
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(seed);
        let z = batch(&mut rng, 6, 4);
        let x = batch(&mut rng, 6, 4);
        let (coupling, w1) = minibatch_w1(&z, &x).unwrap();
        let zs: Vec<&[f64]> = z.iter().map(|p| p.pixels()).collect();
        let xs: Vec<&[f64]> = x.iter().map(|p| p.pixels()).collect();
        let mut g = vec![vec![0.0; 16]; 6];
        w1_subgradient(&coupling, &zs, &xs, 1.0, &mut g);
        let moved: Vec<ImagePatch<f64>> = z
            .iter()
            .zip(&g)
            .map(|(p, gi)| ImagePatch::new(4, 4, p.pixels().iter().zip(gi).map(|(a, b)| a - 1e-4 * b).collect()).unwrap())
            .collect();
        let (_, after) = minibatch_w1(&moved, &x).unwrap();
        assert!(after <= w1 + 1e-8, "{after} > {w1}");
    }
}

#[test]
fn critic_matches_exact_w1_on_identical_distributions() {
    // 1-D toy: real and fake drawn from the same distribution.
    let mut rng = rng_from_seed(3);
    let mut critic = Critic::<f64>::init(1, &[16], 4);
    let mut opt = RmsProp::new(OptimizerSettings { lr: 5e-3, ..OptimizerSettings::default() }, critic.len()).unwrap();
    let draw = |rng: &mut otdenoise::rng::Rng| -> Vec<Vec<f64>> { (0..64).map(|_| vec![rng.random::<f64>()]).collect() };
    for _ in 0..400 {
        let (real, fake) = (draw(&mut rng), draw(&mut rng));
        let t: Vec<f64> = (0..64).map(|_| rng.random()).collect();
        let (_, g) = critic.loss_and_grad(&real, &fake, &t, 10.0).unwrap();
        opt.step(&mut critic.values, &g, 0).unwrap();
    }
    let real: Vec<Vec<f64>> = (0..2000).map(|i| vec![(i as f64 + 0.5) / 2000.0]).collect();
    let fake = real.clone();
    let (l, _) = critic.loss_and_grad(&real, &fake, &vec![0.5; 2000], 10.0).unwrap();
    let exact = {
        let a: Vec<ImagePatch<f64>> = real.iter().take(50).map(|v| ImagePatch::filled(1, 1, v[0])).collect();
        minibatch_w1(&a, &a).unwrap().1
    };
    assert_eq!(exact, 0.0);
    assert!(l.w1_estimate.abs() < 0.05, "{}", l.w1_estimate);
}

#[test]
fn clipped_linear_critic_on_two_point_masses() {
    let mut critic = Critic::<f64>::zeros(1, &[]);
    let mut opt = RmsProp::new(OptimizerSettings { lr: 1e-2, ..OptimizerSettings::default() }, critic.len()).unwrap();
    let real = vec![vec![1.0]; 8];
    let fake = vec![vec![0.0]; 8];
    let mut rng = rng_from_seed(0);
    for _ in 0..500 {
        let t: Vec<f64> = (0..8).map(|_| rng.random()).collect();
        let (_, g) = critic.loss_and_grad(&real, &fake, &t, 10.0).unwrap();
        opt.step(&mut critic.values, &g, 0).unwrap();
        critic.clip_weights(1.0);
    }
    let (l, _) = critic.loss_and_grad(&real, &fake, &[0.5; 8], 10.0).unwrap();
    assert!((0.8..=1.0).contains(&l.w1_estimate), "{}", l.w1_estimate);
}

#[test]
fn forward_is_bit_reproducible() {
    let p = DenoiserParams::<f64>::random(NetSpec::toy(), 12);
    let mut rng = rng_from_seed(1);
    let x = batch(&mut rng, 16, 8);
    let a = forward(&p, &x).unwrap();
    for _ in 0..3 {
        assert_eq!(forward(&p, &x).unwrap(), a);
    }
    let (_, g1) = loss_and_grad(&p, &LossSpec::relaxed(2.0), &x, &x).unwrap();
    let (_, g2) = loss_and_grad(&p, &LossSpec::relaxed(2.0), &x, &x).unwrap();
    assert_eq!(g1, g2);
}

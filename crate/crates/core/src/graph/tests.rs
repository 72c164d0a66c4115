use super::layers::{apply_layer, init_conv, init_dense, Activation, LayerSpec};
use super::{ParamStore, ValueGraph};
use crate::tensor::TensorData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central finite differences over one named parameter (the independent
/// oracle for every analytic gradient below).
fn fd_grad(
    store: &ParamStore<f64>,
    name: &str,
    h: f64,
    eval: &dyn Fn(&ParamStore<f64>) -> f64,
) -> Vec<f64> {
    let n = store.get(name).unwrap().data.len();
    (0..n)
        .map(|i| {
            let mut sp = store.clone();
            sp.get_mut(name).unwrap().data[i] += h;
            let mut sm = store.clone();
            sm.get_mut(name).unwrap().data[i] -= h;
            (eval(&sp) - eval(&sm)) / (2.0 * h)
        })
        .collect()
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn dense_zero_weights_maps_to_zero() {
    let mut store = ParamStore::<f64>::new();
    store.insert("l.w", TensorData::zeros(vec![3, 1]));
    store.insert("l.b", TensorData::zeros(vec![1]));
    let mut g = ValueGraph::new();
    let x = g.constant(TensorData::vector(vec![0.3, -2.0, 5.0]));
    let y = apply_layer(&mut g, &LayerSpec::dense(1), x, "l", &store).unwrap();
    assert_eq!(g.value(y), &[0.0]);
}

#[test]
fn blurpool_preserves_constant_images() {
    let mut g = ValueGraph::<f64>::new();
    let c = 3.7;
    let img = g.constant(TensorData::full(vec![4, 4, 1], c));
    let out = g.blurpool2d(img);
    assert_eq!(g.shape(out), &[2, 2, 1]);
    for &v in g.value(out) {
        assert!((v - c).abs() < 1e-12, "got {v}, want {c}");
    }
}

#[test]
fn swish_definition() {
    let mut g = ValueGraph::<f64>::new();
    let x = g.constant(TensorData::vector(vec![0.0, 10.0]));
    let y = g.swish(x);
    assert_eq!(g.value(y)[0], 0.0);
    assert!((g.value(y)[1] - 10.0).abs() < 1e-3);
}

#[test]
fn backward_quadratic() {
    let mut store = ParamStore::<f64>::new();
    store.insert("p", TensorData::vector(vec![1.0, 2.0]));
    let mut g = ValueGraph::new();
    let p = g.param("p", &store).unwrap();
    let sq = g.mul(p, p);
    let out = g.sum_all(sq);
    let grads = g.backward_grad(out).unwrap();
    assert_eq!(grads["p"], vec![2.0, 4.0]);
}

#[test]
fn backward_of_constant_is_zero() {
    let mut store = ParamStore::<f64>::new();
    store.insert("p", TensorData::vector(vec![1.0, 2.0]));
    let mut g = ValueGraph::new();
    let _p = g.param("p", &store).unwrap();
    let c = g.constant_scalar(5.0);
    let grads = g.backward_grad(c).unwrap();
    assert_eq!(grads["p"], vec![0.0, 0.0]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut g = ValueGraph::<f64>::new();
    let v = g.constant(TensorData::vector(vec![1.0, 2.0]));
    assert!(g.backward_grad(v).is_err());
}

#[test]
fn param_lookup_rejects_unknown_name() {
    let store = ParamStore::<f64>::new();
    let mut g = ValueGraph::new();
    assert!(g.param("nope", &store).is_err());
}

#[test]
fn dense_rejects_shape_mismatch() {
    let mut store = ParamStore::<f64>::new();
    store.insert("l.w", TensorData::zeros(vec![4, 2]));
    store.insert("l.b", TensorData::zeros(vec![2]));
    let mut g = ValueGraph::new();
    let x = g.constant(TensorData::vector(vec![1.0, 2.0, 3.0]));
    let err = apply_layer(&mut g, &LayerSpec::dense(2), x, "l", &store);
    assert!(matches!(err, Err(crate::Error::ShapeMismatch { .. })));
}

#[test]
fn dense_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::<f64>::new();
    init_dense(&mut store, "l", 4, 3, &mut rng);
    store.get_mut("l.b").unwrap().data = rand_vec(&mut rng, 3);
    let x = rand_vec(&mut rng, 8); // batch of 2
    let eval = |s: &ParamStore<f64>| {
        let mut g = ValueGraph::new();
        let xin = g.constant(TensorData::matrix(2, 4, x.clone()));
        let y = apply_layer(&mut g, &LayerSpec::dense(3), xin, "l", s).unwrap();
        let y = g.swish(y);
        let out = g.mean_all(y);
        g.scalar_value(out)
    };
    let mut g = ValueGraph::new();
    let xin = g.constant(TensorData::matrix(2, 4, x.clone()));
    let y = apply_layer(&mut g, &LayerSpec::dense(3), xin, "l", &store).unwrap();
    let y = g.swish(y);
    let out = g.mean_all(y);
    let grads = g.backward_grad(out).unwrap();
    for name in ["l.w", "l.b"] {
        let fd = fd_grad(&store, name, 1e-5, &eval);
        assert!(
            max_rel_err(&grads[name], &fd) <= 1e-4,
            "{name}: rel err {}",
            max_rel_err(&grads[name], &fd)
        );
    }
}

/// Parameter gradients of every layer kind against central differences.
#[test]
fn every_layer_kind_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::<f64>::new();
    init_conv(&mut store, "c", 3, 2, 3, &mut rng);
    store.get_mut("c.b").unwrap().data = rand_vec(&mut rng, 3);
    let img = rand_vec(&mut rng, 4 * 4 * 2);

    // conv2d -> leaky-relu -> blurpool -> resize2x -> sigmoid -> mean
    let eval = |s: &ParamStore<f64>| {
        let mut g = ValueGraph::new();
        let x = g.constant(TensorData::new(vec![4, 4, 2], img.clone()));
        let y = apply_layer(&mut g, &LayerSpec::conv2d(3, 3), x, "c", s).unwrap();
        let y = apply_layer(
            &mut g,
            &LayerSpec::activation(Activation::LeakyRelu),
            y,
            "",
            s,
        )
        .unwrap();
        let y = g.blurpool2d(y);
        let y = g.resize2x(y);
        let y = g.sigmoid(y);
        let out = g.mean_all(y);
        g.scalar_value(out)
    };
    let mut g = ValueGraph::new();
    let x = g.constant(TensorData::new(vec![4, 4, 2], img.clone()));
    let y = apply_layer(&mut g, &LayerSpec::conv2d(3, 3), x, "c", &store).unwrap();
    let y = g.leaky_relu(y, 0.2);
    let y = g.blurpool2d(y);
    let y = g.resize2x(y);
    let y = g.sigmoid(y);
    let out = g.mean_all(y);
    let grads = g.backward_grad(out).unwrap();
    for name in ["c.w", "c.b"] {
        let fd = fd_grad(&store, name, 1e-5, &eval);
        assert!(
            max_rel_err(&grads[name], &fd) <= 1e-4,
            "{name}: rel err {}",
            max_rel_err(&grads[name], &fd)
        );
    }
}

#[test]
fn input_grad_of_linear_field_is_the_direction() {
    // d(x) = u . x  =>  grad_x d = u at every point
    let u = [0.3, -1.2, 0.7];
    let mut g = ValueGraph::<f64>::new();
    let x = g.input("x", TensorData::matrix(2, 3, vec![0.1, 0.2, 0.3, -1.0, 2.0, 0.5]));
    let uw = g.constant(TensorData::matrix(3, 1, u.to_vec()));
    let d = g.matmul(x, uw);
    let dsum = g.sum_all(d);
    let grad = g.input_grad(dsum, x).unwrap();
    let gv = g.value(grad);
    for row in 0..2 {
        for k in 0..3 {
            assert!((gv[row * 3 + k] - u[k]).abs() < 1e-12);
        }
    }
}

fn build_mlp_store(rng: &mut ChaCha8Rng) -> ParamStore<f64> {
    let mut store = ParamStore::new();
    init_dense(&mut store, "m.0", 3, 8, rng);
    init_dense(&mut store, "m.1", 8, 8, rng);
    init_dense(&mut store, "m.2", 8, 1, rng);
    store.get_mut("m.0.b").unwrap().data = rand_vec(rng, 8);
    store.get_mut("m.1.b").unwrap().data = rand_vec(rng, 8);
    store
}

fn mlp_output(g: &mut ValueGraph<f64>, x: super::NodeId, store: &ParamStore<f64>) -> super::NodeId {
    let h = apply_layer(g, &LayerSpec::dense(8), x, "m.0", store).unwrap();
    let h = g.swish(h);
    let h = apply_layer(g, &LayerSpec::dense(8), h, "m.1", store).unwrap();
    let h = g.swish(h);
    apply_layer(g, &LayerSpec::dense(1), h, "m.2", store).unwrap()
}

#[test]
fn input_grad_of_mlp_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let store = build_mlp_store(&mut rng);
    let pts = rand_vec(&mut rng, 6); // 2 points

    let mut g = ValueGraph::new();
    let x = g.input("x", TensorData::matrix(2, 3, pts.clone()));
    let d = mlp_output(&mut g, x, &store);
    let dsum = g.sum_all(d);
    let grad = g.input_grad(dsum, x).unwrap();
    let analytic = g.value(grad).to_vec();

    // finite differences over the input points
    let h = 1e-6;
    let mut fd = Vec::new();
    for i in 0..6 {
        let mut pp = pts.clone();
        pp[i] += h;
        let mut pm = pts.clone();
        pm[i] -= h;
        let f = |p: &[f64]| {
            let mut g = ValueGraph::new();
            let x = g.input("x", TensorData::matrix(2, 3, p.to_vec()));
            let d = mlp_output(&mut g, x, &store);
            let s = g.sum_all(d);
            g.scalar_value(s)
        };
        fd.push((f(&pp) - f(&pm)) / (2.0 * h));
    }
    assert!(
        max_rel_err(&analytic, &fd) <= 1e-4,
        "rel err {}",
        max_rel_err(&analytic, &fd)
    );
}

/// Nested oracle: parameter gradient of ||grad_x f||^2 against a double
/// finite-difference (FD over theta of an FD-free inner input gradient).
#[test]
fn nested_gradient_matches_double_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let store = build_mlp_store(&mut rng);
    let pts = rand_vec(&mut rng, 9); // 3 points

    // loss(theta) = mean over points of ||grad_x f||^2, with grad_x f from
    // the in-graph extension
    let eval = |s: &ParamStore<f64>| {
        let mut g = ValueGraph::new();
        let x = g.input("x", TensorData::matrix(3, 3, pts.clone()));
        let d = mlp_output(&mut g, x, s);
        let dsum = g.sum_all(d);
        let n = g.input_grad(dsum, x).unwrap();
        let n2 = g.mul(n, n);
        let row = g.sum_axis1(n2);
        let out = g.mean_all(row);
        g.scalar_value(out)
    };

    let mut g = ValueGraph::new();
    let x = g.input("x", TensorData::matrix(3, 3, pts.clone()));
    let d = mlp_output(&mut g, x, &store);
    let dsum = g.sum_all(d);
    let n = g.input_grad(dsum, x).unwrap();
    let n2 = g.mul(n, n);
    let row = g.sum_axis1(n2);
    let out = g.mean_all(row);
    let grads = g.backward_grad(out).unwrap();

    for name in ["m.0.w", "m.1.w", "m.2.w", "m.0.b", "m.1.b", "m.2.b"] {
        let fd = fd_grad(&store, name, 1e-5, &eval);
        let err = max_rel_err(&grads[name], &fd);
        assert!(err <= 1e-3, "{name}: rel err {err}");
    }
}

/// Norm of the input gradient, differentiated w.r.t. parameters (the exact
/// expression the surface-normal losses use).
#[test]
fn grad_norm_parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let store = build_mlp_store(&mut rng);
    let pts = rand_vec(&mut rng, 6);

    let build = |g: &mut ValueGraph<f64>, s: &ParamStore<f64>| {
        let x = g.input("x", TensorData::matrix(2, 3, pts.clone()));
        let d = mlp_output(g, x, s);
        let dsum = g.sum_all(d);
        let n = g.input_grad(dsum, x).unwrap();
        let n2 = g.mul(n, n);
        let row = g.sum_axis1(n2);
        let norm = g.sqrt(row);
        g.mean_all(norm)
    };
    let eval = |s: &ParamStore<f64>| {
        let mut g = ValueGraph::new();
        let out = build(&mut g, s);
        g.scalar_value(out)
    };
    let mut g = ValueGraph::new();
    let out = build(&mut g, &store);
    let grads = g.backward_grad(out).unwrap();
    for name in ["m.0.w", "m.1.w", "m.2.w"] {
        let fd = fd_grad(&store, name, 1e-5, &eval);
        let err = max_rel_err(&grads[name], &fd);
        assert!(err <= 1e-3, "{name}: rel err {err}");
    }
}

#[test]
fn min_axis1_routes_gradient_through_minimizing_sample() {
    let mut store = ParamStore::<f64>::new();
    store.insert("p", TensorData::vector(vec![0.5, -0.3, 0.9, 0.2]));
    let mut g = ValueGraph::new();
    let p = g.param("p", &store).unwrap();
    let m = g.reshape(p, vec![2, 2]);
    let mn = g.min_axis1(m);
    let out = g.sum_all(mn);
    let grads = g.backward_grad(out).unwrap();
    // row 0 min is p[1], row 1 min is p[3]
    assert_eq!(grads["p"], vec![0.0, 1.0, 0.0, 1.0]);
}

#[test]
fn evaluation_is_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let store = build_mlp_store(&mut rng);
    let pts = rand_vec(&mut rng, 6);
    let run = || {
        let mut g = ValueGraph::new();
        let x = g.input("x", TensorData::matrix(2, 3, pts.clone()));
        let d = mlp_output(&mut g, x, &store);
        let dsum = g.sum_all(d);
        let n = g.input_grad(dsum, x).unwrap();
        let n2 = g.mul(n, n);
        let row = g.sum_axis1(n2);
        let out = g.mean_all(row);
        let grads = g.backward_grad(out).unwrap();
        (g.value(out).to_vec(), grads["m.1.w"].clone())
    };
    let (v1, g1) = run();
    let (v2, g2) = run();
    assert_eq!(v1, v2);
    assert_eq!(g1, g2);
}

#[test]
fn concat_slice_roundtrip_and_gradient() {
    let mut store = ParamStore::<f64>::new();
    store.insert("a", TensorData::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
    store.insert("b", TensorData::matrix(2, 3, vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]));
    let mut g = ValueGraph::new();
    let a = g.param("a", &store).unwrap();
    let b = g.param("b", &store).unwrap();
    let cat = g.concat(1, &[a, b]);
    assert_eq!(g.shape(cat), &[2, 5]);
    assert_eq!(
        g.value(cat),
        &[1.0, 2.0, 5.0, 6.0, 7.0, 3.0, 4.0, 8.0, 9.0, 10.0]
    );
    let back = g.slice(cat, 1, 0, 2);
    assert_eq!(g.value(back), g.value(a));
    // gradient of sum(slice(concat)) w.r.t. b must be zero, w.r.t. a ones
    let out = g.sum_all(back);
    let grads = g.backward_grad(out).unwrap();
    assert_eq!(grads["a"], vec![1.0; 4]);
    assert_eq!(grads["b"], vec![0.0; 6]);
}

#[test]
fn gather_pix_gradient_scatters() {
    let mut store = ParamStore::<f64>::new();
    store.insert("map", TensorData::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]));
    let mut g = ValueGraph::new();
    let m = g.param("map", &store).unwrap();
    let got = g.gather_pix(m, vec![(0, 1), (1, 1), (0, 1)]);
    assert_eq!(g.value(got), &[2.0, 4.0, 2.0]);
    let out = g.sum_all(got);
    let grads = g.backward_grad(out).unwrap();
    assert_eq!(grads["map"], vec![0.0, 2.0, 0.0, 1.0]);
}

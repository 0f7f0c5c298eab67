mod common;

use common::oracle::{brute_percentile, dense_blur, scalar_bilinear};
use common::{random_image, rng, small_net};
use groupcam::model::{softmax, ConvNet, NetConfig};
use groupcam::saliency::{
    finetune_mask, grad_cam, group_cam, Method, DEFAULT_KSIZE, DEFAULT_SIGMA, FINETUNE_GROUPS,
};
use groupcam::{Counting, GroupCamConfig, ImageTensor, Map2D, ModelAdapter};

fn minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

fn prob(net: &ConvNet, img: &ImageTensor, class: usize) -> f64 {
    softmax(&net.logits(img).unwrap())[class]
}

/// Group-CAM written out step by step from the adapter's activations and gradients.
fn brute_group_cam(net: &mut ConvNet, img: &ImageTensor, class: usize, cfg: &GroupCamConfig) -> Vec<f64> {
    let layer = net.default_target_layer();
    let b = net.activations_with_gradients(img, class, &layer).unwrap();
    let (k, h, w) = (b.activations.channels, b.activations.height, b.activations.width);
    let z = h * w;
    let weights: Vec<f64> = (0..k)
        .map(|ch| (0..z).map(|i| b.gradients.data[ch * z + i]).sum::<f64>() / z as f64)
        .collect();
    let size = k / cfg.groups;
    let (c, ih, iw) = img.shape();
    let blurred = dense_blur(img, cfg.ksize, cfg.sigma);
    let base = ImageTensor::new(c, ih, iw, blurred.clone()).unwrap();
    let base_score = prob(net, &base, class);

    let mut total = vec![0.0; ih * iw];
    for g in 0..cfg.groups {
        let end = if g + 1 == cfg.groups { k } else { (g + 1) * size };
        let mut m = vec![0.0; z];
        for ch in g * size..end {
            for i in 0..z {
                m[i] += weights[ch] * b.activations.data[ch * z + i];
            }
        }
        let m: Vec<f64> = m.iter().map(|v| v.max(0.0)).collect();
        let m = if cfg.denoise {
            let p = brute_percentile(&m, cfg.theta);
            m.iter().map(|&v| if v > p { v } else { 0.0 }).collect()
        } else {
            m
        };
        let up = scalar_bilinear(&Map2D::new(h, w, minmax(&m)).unwrap(), ih, iw);
        let blend: Vec<f64> = (0..c * ih * iw)
            .map(|i| img.data()[i] * up[i % (ih * iw)] + blurred[i] * (1.0 - up[i % (ih * iw)]))
            .collect();
        let alpha = prob(net, &ImageTensor::new(c, ih, iw, blend).unwrap(), class) - base_score;
        for (t, u) in total.iter_mut().zip(&up) {
            *t += alpha * u;
        }
    }
    minmax(&total.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
}

#[test]
fn group_cam_matches_brute_force() {
    let mut r = rng(21);
    let configs = [
        GroupCamConfig { groups: 4, ksize: 7, sigma: 3.0, ..Default::default() },
        GroupCamConfig { groups: 3, theta: 50.0, ksize: 5, sigma: 2.0, ..Default::default() },
        GroupCamConfig { groups: 8, denoise: false, ksize: 9, sigma: 5.0, ..Default::default() },
    ];
    for seed in 0..3 {
        let mut net = small_net(seed);
        for cfg in &configs {
            let img = random_image(&mut r, 3, 16, 16);
            for class in 0..3 {
                let (map, scores) = group_cam(&mut net, &img, class, cfg).unwrap();
                assert_eq!(scores.len(), cfg.groups);
                let expected = brute_group_cam(&mut net, &img, class, cfg);
                let err = map.data().iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err <= 1e-9, "seed {seed} groups {} class {class}: {err}", cfg.groups);
            }
        }
    }
}

#[test]
fn single_group_without_denoise_reduces_to_grad_cam() {
    let mut r = rng(22);
    let mut checked = 0;
    for seed in 0..6 {
        let mut net = small_net(seed);
        let cfg = GroupCamConfig { groups: 1, denoise: false, ..Default::default() };
        for _ in 0..4 {
            let img = random_image(&mut r, 3, 16, 16);
            let class = (seed as usize) % 3;
            let (g, scores) = group_cam(&mut net, &img, class, &cfg).unwrap();
            if scores[0].alpha <= 0.0 {
                continue;
            }
            let c = grad_cam(&mut net, &img, class, None).unwrap();
            assert_eq!(g.method, Method::GroupCam);
            assert_eq!(c.method, Method::GradCam);
            let err = g.data().iter().zip(c.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-6, "max difference {err}");
            checked += 1;
        }
    }
    assert!(checked >= 5, "only {checked} images with a positive gain");
}

#[test]
fn query_budget_is_groups_plus_two() {
    let mut net = Counting::new(ConvNet::new(NetConfig::fixture(), 3).unwrap());
    let img = random_image(&mut rng(23), 3, 64, 64);
    for groups in [1, 4, 16, 32] {
        net.reset();
        let cfg = GroupCamConfig { groups, ..Default::default() };
        group_cam(&mut net, &img, 1, &cfg).unwrap();
        assert_eq!(net.query_count(), groups as u64 + 2, "group_cam G={groups}");
        net.reset();
        finetune_mask(&mut net, &img, 1, groups, DEFAULT_KSIZE, DEFAULT_SIGMA).unwrap();
        assert_eq!(net.query_count(), groups as u64 + 1, "finetune_mask G={groups}");
    }
    net.reset();
    grad_cam(&mut net, &img, 0, None).unwrap();
    assert_eq!(net.query_count(), 1);
}

#[test]
fn more_groups_than_channels_is_an_error() {
    let mut net = small_net(0);
    let img = random_image(&mut rng(24), 3, 16, 16);
    let k = net.config().conv_channels.last().copied().unwrap();
    assert!(group_cam(&mut net, &img, 0, &GroupCamConfig { groups: k, ..Default::default() }).is_ok());
    assert!(group_cam(&mut net, &img, 0, &GroupCamConfig { groups: k + 1, ..Default::default() }).is_err());
    assert!(group_cam(&mut net, &img, 3, &GroupCamConfig::default()).is_err());
    assert!(group_cam(&mut net, &img, 0, &GroupCamConfig { groups: 0, ..Default::default() }).is_err());
    assert!(group_cam(&mut net, &img, 0, &GroupCamConfig { theta: 101.0, ..Default::default() }).is_err());
    assert!(group_cam(&mut net, &img, 0, &GroupCamConfig { ksize: 4, ..Default::default() }).is_err());
    let bad_layer = GroupCamConfig { layer_id: Some("nope".into()), ..Default::default() };
    assert!(group_cam(&mut net, &img, 0, &bad_layer).is_err());
}

#[test]
fn maps_are_normalized_and_deterministic() {
    let mut net = small_net(5);
    let img = random_image(&mut rng(25), 3, 16, 16);
    let cfg = GroupCamConfig { groups: 4, ..Default::default() };
    let (a, _) = group_cam(&mut net, &img, 2, &cfg).unwrap();
    let (b, _) = group_cam(&mut net, &img, 2, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.height(), a.width()), (16, 16));
    assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn earlier_target_layer_is_honoured() {
    let mut net = small_net(6);
    let img = random_image(&mut rng(26), 3, 16, 16);
    let cfg = GroupCamConfig { groups: 2, layer_id: Some("conv1".into()), ..Default::default() };
    let (map, scores) = group_cam(&mut net, &img, 0, &cfg).unwrap();
    assert_eq!(scores.len(), 2);
    assert_eq!((map.height(), map.width()), (16, 16));
    assert!(grad_cam(&mut net, &img, 0, Some("conv1")).is_ok());
    assert!(grad_cam(&mut net, &img, 0, Some("conv9")).is_err());
}

#[test]
fn finetune_masks_are_binary() {
    let mut net = ConvNet::new(NetConfig::fixture(), 7).unwrap();
    let mut r = rng(27);
    for _ in 0..3 {
        let img = random_image(&mut r, 3, 64, 64);
        let m = finetune_mask(&mut net, &img, 0, FINETUNE_GROUPS, DEFAULT_KSIZE, DEFAULT_SIGMA).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

import math

import numpy as np
import pytest

import wirevid as wv


def rand_frame(rng, h=32, w=32):
    return rng.uniform(0.0, 255.0, size=(3, h, w)).astype(np.float32)


def test_snr_conversions_round_trip():
    s2 = wv.noise_power_for_snr(1.0, -5.0)
    assert s2 == pytest.approx(10 ** 0.5)
    assert wv.snr_db(1.0, s2) == pytest.approx(-5.0, abs=1e-12)
    with pytest.raises(ValueError):
        wv.snr_db(0.0, 1.0)
    assert wv.cond_snr_db(1.0, 0.0) == pytest.approx(60.0)


def test_power_normalize_sets_mean_symbol_power():
    rng = np.random.default_rng(0)
    z = rng.normal(size=64).astype(np.float32)
    zn = wv.power_normalize(z, power=2.0)
    k = len(z) // 2
    assert np.sum(zn.astype(np.float64) ** 2) / k == pytest.approx(2.0, rel=1e-5)
    with pytest.raises(ValueError):
        wv.power_normalize(np.zeros(8, dtype=np.float32))


def test_transmit_truncates_and_is_quiet_at_zero_noise():
    z = np.arange(1, 17, dtype=np.float32)
    out = wv.transmit(z, blocks=4, v=2, power=1.0, sigma2=0.0, seed=3)
    assert np.all(out[8:] == 0.0)
    assert np.any(out[:8] != 0.0)
    # the kept prefix keeps its direction, it is only rescaled
    ratios = out[:8] / z[:8]
    assert np.allclose(ratios, ratios[0], rtol=1e-5)
    assert np.all(wv.transmit(z, blocks=4, v=0) == 0.0)


def test_metrics_reference_points():
    a = np.full((3, 16, 16), 100.0, dtype=np.float32)
    b = np.full((3, 16, 16), 116.0, dtype=np.float32)
    assert wv.mse(a, b) == pytest.approx(256.0)
    assert wv.psnr_db(256.0) == pytest.approx(10 * math.log10(255.0**2 / 256.0))
    assert wv.psnr_db(0.0) == pytest.approx(100.0)

    rng = np.random.default_rng(1)
    x = rand_frame(rng, 48, 48)
    assert wv.ms_ssim(x, x, levels=2) == pytest.approx(1.0, abs=1e-6)
    assert wv.max_msssim_levels(64, 64) == 3
    w = wv.msssim_weights(3)
    assert sum(w) == pytest.approx(1.0)


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    f = np.round(rand_frame(rng, 9, 7))
    path = str(tmp_path / "f.ppm")
    wv.write_ppm(f, path)
    g = wv.read_ppm(path)
    assert g.shape == (3, 9, 7)
    assert np.array_equal(f, g)


def test_allocation_helpers():
    assert wv.count_actions(4, 20) == 1771
    acts = wv.enumerate_actions(2, 2)
    assert acts == [[0, 2], [1, 1], [2, 0]]
    u = wv.uniform_action(4, 5)
    assert u == [1, 1, 1, 2]
    assert sum(wv.uniform_action(3, 8)) == 8


def test_epsilon_schedule_endpoints():
    assert wv.epsilon_schedule(0) == pytest.approx(0.9)
    assert wv.epsilon_schedule(1000) == pytest.approx(0.05 + 0.85 * math.exp(-1.0))
    assert wv.epsilon_schedule(10**9) == pytest.approx(0.05)


def test_snr_grid():
    g = wv.snr_grid(-5.0, 20.0, 1.0)
    assert len(g) == 26
    assert g[0] == -5.0 and g[-1] == 20.0
    with pytest.raises(ValueError):
        wv.snr_grid(10.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        wv.snr_grid(0.0, 10.0, 0.0)


def test_interpolation_schedule():
    assert wv.interpolation_schedule(4) == [(2, 2), (1, 1), (3, 1)]
    with pytest.raises(ValueError):
        wv.interpolation_schedule(3)


def test_synth_clip_is_deterministic_and_moves():
    a = wv.synth_clip(11, 5, 32, 32)
    b = wv.synth_clip(11, 5, 32, 32)
    assert a.shape == (5, 3, 32, 32)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 255.0
    assert np.any(a[0] != a[4])


@pytest.fixture(scope="module")
def tiny_codec():
    cfg = wv.CodecConfig(channels=8, gop=4, blocks=4, hidden=12, ssf_levels=3)
    return wv.Codec(cfg, seed=1)


def test_codec_shapes_and_determinism(tiny_codec):
    rng = np.random.default_rng(3)
    x = rand_frame(rng)
    z = tiny_codec.encode_key(x, 10.0)
    assert z.shape == (8, 2, 2)
    assert 2 * tiny_codec.config.latent_symbols(32, 32) == z.size
    y = tiny_codec.decode_key(z, 10.0)
    assert y.shape == (3, 32, 32)
    assert y.min() >= 0.0 and y.max() <= 255.0
    assert np.array_equal(z, tiny_codec.encode_key(x, 10.0))


def test_codec_save_load_round_trip(tiny_codec, tmp_path):
    path = str(tmp_path / "model.ckpt")
    tiny_codec.save(path)
    again = wv.Codec.load(path)
    assert again.param_count == tiny_codec.param_count
    rng = np.random.default_rng(4)
    x = rand_frame(rng)
    assert np.array_equal(tiny_codec.encode_key(x, 5.0), again.encode_key(x, 5.0))


def test_noiseless_key_transmission_matches_emulation(tiny_codec):
    rng = np.random.default_rng(5)
    x = rand_frame(rng)
    recv, emul = tiny_codec.transmit_key(x, v=4, sigma2=0.0, sigma2_est=0.0, seed=2)
    assert np.array_equal(recv, emul)
    est = tiny_codec.emulate_reference(x, v=4, sigma2_est=0.0, seed=2)
    assert np.array_equal(recv, est)


def test_group_transmission(tiny_codec):
    rng = np.random.default_rng(6)
    ref = rand_frame(rng)
    frames = [rand_frame(rng) for _ in range(4)]
    recv, emul = tiny_codec.transmit_group(
        ref, ref, frames, alloc=[1, 1, 1, 2], sigma2=0.1, sigma2_est=0.1, seed=7
    )
    assert len(recv) == 4
    assert all(f.shape == (3, 32, 32) for f in recv)
    with pytest.raises(ValueError):
        tiny_codec.transmit_group(ref, ref, frames, alloc=[1, 1])


def test_evaluate_sweep_and_outputs(tiny_codec, tmp_path):
    data = tmp_path / "data"
    lines = []
    for i, split in enumerate(["train", "test"]):
        clip_dir = data / f"clip_{i}"
        clip_dir.mkdir(parents=True)
        clip = wv.synth_clip(50 + i, 5, 32, 32)
        for t in range(clip.shape[0]):
            wv.write_ppm(clip[t], str(clip_dir / f"frame_{t:03d}.ppm"))
        lines.append(f"clip_{i} 5 {split}")
    manifest = data / "index.txt"
    manifest.write_text("\n".join(lines) + "\n")

    model = str(tmp_path / "m.ckpt")
    tiny_codec.save(model)
    recs = wv.evaluate_sweep(
        model, str(manifest), split="test", snrs=[0.0, 10.0], metrics=["psnr"]
    )
    assert len(recs) == 2
    assert {r["snr_test"] for r in recs} == {0.0, 10.0}
    assert all(r["policy"] == "uniform" and r["metric"] == "psnr" for r in recs)
    assert all(math.isfinite(r["mean"]) for r in recs)

    out = tmp_path / "out"
    wv.write_outputs(recs, str(out))
    csv = (out / "records.csv").read_text().splitlines()
    assert csv[0] == "snr_test,snr_est,policy,metric,mean,std"
    assert len(csv) == 3
    assert (out / "sweep_psnr.svg").exists()

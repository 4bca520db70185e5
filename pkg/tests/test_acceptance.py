"""Acceptance gate: one group of checks per numbered criterion.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary (see
conftest.py) prints one PASS/FAIL line per criterion, plus a line for every
claim that is deliberately kept as a strict expected failure.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from groomkit import codec, densify, latent, metrics, refine, scalp, synth
from groomkit.densify import WeightMap, apply_weights, footprint
from groomkit.groom import Groom
from groomkit.io import read_groom
from groomkit.metrics import jitter, local_error, messiness, penetration_rate, volumetric_compare
from groomkit.refine import RefineParams, duplicate, rotation_factors, wisp_formation
from groomkit.scalp import DEFAULT_SCALP, HIGH, LOW, groom_to_map, map_to_groom
from groomkit.strand import to_gradients

from helpers import curly_strands, random_strands, texel_groom
from oracles import bilinear_texel, naive_decode, naive_encode

criterion = pytest.mark.criterion

PER_RECIPE = 52          # 5 recipes x 52 x mirror = 520 grooms
EVAL_PER_STYLE = 40      # 5 styles x 40 = the 200-groom messiness set


# ---------------------------------------------------------------- shared data

@pytest.fixture(scope="module")
def fitted():
    """Models fit on the 520-groom synthetic set, plus what the checks need.

    The full strand maps (~1.5 GB) are dropped once the derived quantities
    are computed, so later heavy criteria have memory to work with.
    """
    maps, eval_idx, src_mess = [], [], []
    for i, g in enumerate(synth.iter_dataset(synth.default_recipes(), PER_RECIPE, seed=0)):
        maps.append(groom_to_map(g)[0])
        if i % (2 * PER_RECIPE) < EVAL_PER_STYLE:
            eval_idx.append(i)
            src_mess.append(messiness(g))
    t0 = time.perf_counter()
    sm, hm = latent.fit_models(maps, 64, 512, strand_samples=20000, seed=0)
    fit_seconds = time.perf_counter() - t0
    codes = latent.sample_map_codes(maps, 20000, seed=0)
    lms = [latent.strand_map_to_latent(sm, m) for m in maps]
    del maps
    return dict(sm=sm, hm=hm, fit_seconds=fit_seconds, codes=codes, lms=lms,
                eval_idx=eval_idx, src_mess=np.array(src_mess))


@pytest.fixture(scope="module")
def reconstructed_messiness(fitted):
    sm, hm, lms = fitted["sm"], fitted["hm"], fitted["lms"]
    out = []
    for i in fitted["eval_idx"]:
        lm = latent.decode_hairstyle(hm, latent.encode_hairstyle(hm, lms[i]))
        out.append(messiness(map_to_groom(latent.latent_to_strand_map(sm, lm))))
    return np.array(out)


@pytest.fixture(scope="module")
def parted_high(parted_low):
    out = {}
    for name, fn in (("nearest", densify.upsample_nearest), ("bilinear", densify.upsample_bilinear),
                     ("parting", densify.upsample_parting_aware)):
        t0 = time.perf_counter()
        high, w = fn(parted_low)
        g = map_to_groom(high)
        out[name] = dict(rate=penetration_rate(g), strands=len(g),
                         seconds=time.perf_counter() - t0)
    return out


# ---------------------------------------------------------------- criterion 1

@criterion(1)
def test_codec_round_trip_fast_and_exact():
    pts = random_strands(1000, seed=100)
    roots, grads = to_gradients(pts)
    t0 = time.perf_counter()
    code = codec.encode(grads)
    back = codec.decode(code, roots)
    seconds = time.perf_counter() - t0
    assert code.shape == (1000, 459)
    assert (codec.DEFAULT.n_s, codec.DEFAULT.n_g, codec.DEFAULT.k, codec.DEFAULT.f) == (100, 3, 33, 17)
    assert np.linalg.norm(back - pts, axis=-1).max() < 1e-6
    assert seconds < 1.0


@criterion(1)
def test_codec_matches_naive_dft_oracle():
    pts = random_strands(1000, seed=100)
    roots, grads = to_gradients(pts)
    code = codec.encode(grads)
    worst_code = worst_pos = 0.0
    for i in range(1000):
        ref = naive_encode(grads[i])
        # phases of (numerically) zero bands are arbitrary; compare spectra there
        worst_code = max(worst_code, float(np.abs(codec.spectrum(code[i]) - codec.spectrum(ref)).max()))
        if i % 10 == 0:
            worst_pos = max(worst_pos, float(np.linalg.norm(naive_decode(code[i], roots[i]) - pts[i],
                                                             axis=-1).max()))
    assert worst_code < 1e-9 and worst_pos < 1e-6


# ---------------------------------------------------------------- criterion 2

def _amp_phase_code(rng, amps):
    p = np.empty((3, 3, 3, 17))
    p[..., codec.AMP, :] = amps
    ang = rng.uniform(-np.pi, np.pi, (3, 3, 17))
    p[..., codec.COS, :] = np.cos(ang)
    p[..., codec.SIN, :] = np.sin(ang)
    return codec.join(p)


@criterion(2)
def test_equal_amplitudes_survive_interpolation():
    rng = np.random.default_rng(200)
    worst = 0.0
    for _ in range(200):
        amps = rng.exponential(1.0, (3, 3, 17))
        a, b = _amp_phase_code(rng, amps), _amp_phase_code(rng, amps)
        for t in (0.0, 0.25, 0.5, 0.75, 1.0, rng.uniform()):
            out = codec.split(codec.interp_frequency(a, b, t))
            worst = max(worst, float(np.abs(out[..., codec.AMP, :] - amps).max()))
    assert worst < 1e-9


def _sinusoid_strand(phase, band=4, amplitude=0.6):
    k = codec.DEFAULT.k
    t = np.arange(99) % k
    grads = np.zeros((99, 3))
    grads[:, 1] = -1.0
    grads[:, 0] = amplitude * np.cos(2 * np.pi * band * t / k + phase)
    return np.concatenate([np.zeros((1, 3)), np.cumsum(grads, axis=0)])


@criterion(2)
def test_euclidean_midpoint_cancels_carrier():
    band = 4
    a, b = _sinusoid_strand(0.3, band), _sinusoid_strand(0.3 + np.pi, band)
    ca, cb = (codec.encode(to_gradients(s)[1]) for s in (a, b))
    mid = codec.encode(to_gradients(0.5 * (a + b))[1])
    src = min(codec.band_energy(ca, band), codec.band_energy(cb, band))
    assert codec.band_energy(mid, band) < 0.1 * src
    freq_mid = codec.interp_frequency(ca, cb, 0.5)
    assert codec.band_energy(freq_mid, band) == pytest.approx(src, rel=1e-9)


def _interp_trajectories(seed):
    s = curly_strands(2, seed=seed)
    roots, grads = to_gradients(s)
    c = codec.encode(grads)
    ts = np.linspace(0.0, 1.0, 100)
    freq = np.stack([codec.decode(codec.interp_frequency(c[0], c[1], t), roots[0]) for t in ts])
    eucl = np.stack([(1 - t) * s[0] + t * s[1] for t in ts])
    return jitter(freq), jitter(eucl)


def test_interpolation_jitter_finite_and_ordered():
    for seed in range(3):
        jf, je = _interp_trajectories(seed)
        assert np.isfinite(jf) and np.isfinite(je) and je <= jf


@pytest.mark.xfail(strict=True, reason="a linear Euclidean blend has zero third time-difference, "
                   "so no non-trivial trajectory can stay within twice its jitter")
def test_interpolation_jitter_within_twice_euclidean():
    jf, je = _interp_trajectories(0)
    assert jf <= 2.0 * je


# ---------------------------------------------------------------- criterion 3

@criterion(3)
def test_parted_penetration_ordering(parted_high):
    n, p, b = (parted_high[k]["rate"] for k in ("nearest", "parting", "bilinear"))
    print(f"penetration per mille: nearest {n:.3f}, parting-aware {p:.3f}, bilinear {b:.3f}")
    assert n == 0.0 < p < b
    assert b >= 2.0 * p


@criterion(3)
def test_parted_upsampling_runtime(parted_high):
    assert parted_high["parting"]["strands"] > 0
    assert parted_high["parting"]["seconds"] < 30.0


# ---------------------------------------------------------------- criterion 4

@pytest.fixture(scope="module")
def varied_low():
    g = texel_groom()
    curls = curly_strands(len(g), seed=11)
    m, _ = groom_to_map(Groom(g.points[:, :1] + (curls - curls[:, :1]), g.texels, g.resolution))
    rng = np.random.default_rng(12)
    m.mask[rng.uniform(size=LOW) < 0.2] = False
    return m


@criterion(4)
@pytest.mark.parametrize("slot", [0, 1, 2, 3])
def test_delta_weights_bit_exact(varied_low, slot):
    fp = footprint(LOW, HIGH)
    w = np.zeros(5)
    w[slot] = 1.0
    out = apply_weights(varied_low, WeightMap.constant(HIGH, w))
    rows, cols = fp.rows[..., slot], fp.cols[..., slot]
    hit = out.mask & varied_low.mask[rows, cols]
    assert hit.sum() > 0.5 * out.mask.sum()
    assert np.array_equal(out.codes[hit], varied_low.codes[rows, cols][hit])


@criterion(4)
def test_bilinear_weights_match_oracle(varied_low):
    out = apply_weights(varied_low, WeightMap.constant(HIGH, (0, 0, 0, 0, 1)))
    rng = np.random.default_rng(13)
    rr = np.concatenate([rng.integers(0, HIGH[0], 2000), np.zeros(HIGH[1], int), np.full(HIGH[1], HIGH[0] - 1)])
    cc = np.concatenate([rng.integers(0, HIGH[1], 2000), np.arange(HIGH[1]), np.arange(HIGH[1])])
    worst, checked = 0.0, 0
    for r, c in zip(rr, cc):
        ref = bilinear_texel(varied_low.codes, varied_low.mask, r, c, HIGH, codec.DEFAULT.f)
        if ref is None or not out.mask[r, c]:
            continue
        checked += 1
        worst = max(worst, float(np.abs(out.codes[r, c] - ref).max()))
    assert checked > 1500 and worst < 1e-9


@criterion(4)
def test_regularizers_exact(varied_low):
    _, wb = densify.upsample_bilinear(varied_low)
    _, wn = densify.upsample_nearest(varied_low)
    assert densify.weight_regularizers(wb) == (0.0, 0.0, 0.0)
    assert densify.weight_regularizers(wn) == (1.0, 1.0, 0.0)


# ---------------------------------------------------------------- criterion 5

@criterion(5)
def test_refine_chain_clears_penetration(parted_low):
    g = map_to_groom(densify.upsample_bilinear(parted_low)[0])
    assert penetration_rate(g) > 0
    out, stats = refine.refine(g, RefineParams(seed=5))
    assert penetration_rate(out) == 0.0
    assert stats["output"] == len(out)


@criterion(5)
@pytest.mark.parametrize("w,s", [(0, 3.0), (8, 0.0)])
def test_wisp_identity(w, s):
    g = Groom(curly_strands(60, seed=14))
    out = wisp_formation(g, w, s)
    assert out.points.tobytes() == g.points.tobytes()


@criterion(5)
def test_duplicate_25k_by_six():
    g = Groom(random_strands(25000, seed=15))
    t0 = time.perf_counter()
    out = duplicate(g, 6, 0.05, 0.05, texel_pitch=0.7, seed=1)
    seconds = time.perf_counter() - t0
    assert len(out) == 150000 and seconds < 10.0


# ---------------------------------------------------------------- criterion 6

@criterion(6)
def test_rotation_factor_literal():
    f = rotation_factors(20, 0.9, 100, clamp=False)
    assert f[10] == 1.0
    assert abs(f[0] - 0.9 ** -10) < 1e-12
    assert abs(f[25] - 0.9 ** 15) < 1e-12


# ---------------------------------------------------------------- criterion 7

@criterion(7)
def test_jitter_identities():
    t = np.arange(20.0)
    rng = np.random.default_rng(16)
    a, b, c = rng.normal(size=(3, 30, 3))
    affine = a + t[:, None, None] * b
    quad = affine + (t ** 2)[:, None, None] * c
    assert jitter(affine) < 1e-9 and jitter(quad) < 1e-9
    cubic = np.stack([t ** 3, np.zeros_like(t), np.zeros_like(t)], -1)[:, None]
    assert jitter(cubic) == 6.0


@criterion(7)
def test_local_error_translation_invariant():
    a = Groom(random_strands(50, seed=17))
    b = Groom(random_strands(50, seed=18))
    shift = np.array([12.5, -3.0, 40.0])
    assert abs(local_error(a.with_points(a.points + shift), b) - local_error(a, b)) < 1e-12


@criterion(7)
def test_volumetric_self_compare():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        occ = rng.uniform(size=(16, 16, 16)) < rng.uniform(0.05, 0.6)
        flow = rng.normal(size=occ.shape + (3,))
        flow /= np.linalg.norm(flow, axis=-1, keepdims=True)
        flow[~occ] = 0.0
        grid = metrics.VoxelGrid(occ, flow, occ.astype(np.int64), np.zeros(3), 1.0)
        assert volumetric_compare(grid, grid) == (1.0, 1.0, 1.0, 0.0)


# ---------------------------------------------------------------- criterion 8

@criterion(8)
def test_messiness_hand_cases():
    assert messiness(texel_groom()) == pytest.approx(0.0, abs=1e-12)
    base = np.zeros((100, 3))
    base[:, 1] = -np.arange(100.0)
    delta = np.array([0.3, -0.4, 1.2])
    pair = Groom(np.stack([base, base + np.arange(100.0)[:, None] * delta + [5.0, 0.0, 0.0]]))
    assert messiness(pair) == pytest.approx(np.linalg.norm(delta), rel=1e-12)


@criterion(8)
def test_reconstruction_not_messier_on_average(fitted, reconstructed_messiness):
    src = fitted["src_mess"]
    assert len(src) == 200
    rel = reconstructed_messiness.mean() - src.mean()
    print(f"set messiness: source {src.mean():.4f} mm, reconstructed "
          f"{reconstructed_messiness.mean():.4f} mm, relative {rel:+.4f} mm")
    assert rel <= 0.0


@pytest.mark.xfail(strict=True, reason="linear reconstruction adds small per-strand noise, which "
                   "raises messiness on the smoothest individual grooms")
def test_reconstruction_not_messier_for_every_groom(fitted, reconstructed_messiness):
    assert np.all(reconstructed_messiness <= fitted["src_mess"])


# ---------------------------------------------------------------- criterion 9

@criterion(9)
def test_fit_runtime(fitted):
    assert fitted["sm"].components == 64 and fitted["hm"].components == 512
    assert fitted["fit_seconds"] < 60.0


@criterion(9)
def test_errors_decrease_with_components(fitted):
    sm, hm, codes = fitted["sm"], fitted["hm"], fitted["codes"]
    se = [latent.reconstruction_error(sm, codes, c) for c in (8, 16, 64)]
    flat = np.stack([lm.to_array().reshape(-1) for lm in fitted["lms"]])
    he = [latent.reconstruction_error(hm, flat, c) for c in (64, 256, 512)]
    assert se[0] > se[1] > se[2]
    assert he[0] > he[1] > he[2]


@criterion(9)
def test_mean_encodes_to_zero(fitted):
    for m in (fitted["sm"], fitted["hm"]):
        assert np.abs(latent.encode(m, m.mean)).max() < 1e-9


@criterion(9)
def test_sampled_grooms_valid(fitted):
    sm, hm = fitted["sm"], fitted["hm"]
    for seed in range(20):
        lm = latent.sample_hairstyle(hm, seed)
        assert 0.0 <= lm.baldness.min() and lm.baldness.max() <= 1.0
        smap = latent.latent_to_strand_map(sm, lm)
        assert codec.check_code(smap.codes) == 0
        g = map_to_groom(smap)
        assert len(g) == smap.occupied > 0 and g.n_points == 100
        assert np.isfinite(g.points).all()
        assert np.linalg.norm(DEFAULT_SCALP.project(g.roots) - g.roots, axis=-1).max() < 2.0
        again, skipped = groom_to_map(g)
        assert skipped == 0 and np.array_equal(again.mask, smap.mask)


@criterion(9)
def test_baldness_round_trip_iou(fitted):
    hm, lms = fitted["hm"], fitted["lms"]
    ious = [scalp.baldness_iou(lm.baldness, latent.decode_hairstyle(hm, latent.encode_hairstyle(hm, lm)).baldness,
                               threshold=0.8) for lm in lms]
    assert min(ious) >= 0.9


# ---------------------------------------------------------------- criterion 10

def _cli(args, cwd, threads):
    env = dict(os.environ, GROOMKIT_THREADS=str(threads))
    p = subprocess.run([sys.executable, "-m", "groomkit.cli", *map(str, args)], cwd=cwd,
                       capture_output=True, text=True, env=env)
    assert p.returncode == 0, p.stderr
    return p.stdout


def _tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


SEEDED_COMMANDS = [
    ["gen", "--seed", 3, "--out", "one.gks"],
    ["gen", "--count", 30, "--seed", 4, "--out", "data"],
    ["fit", "data", "--strand-components", 16, "--hairstyle-components", 12,
     "--strand-samples", 4000, "--seed", 2, "--out", "models"],
    ["sample", "--model", "models", "--seed", 7, "--out", "s.gks", "--map-out", "s.map"],
    ["encode", "one.gks", "--out", "one.map"],
    ["decode", "one.map", "--out", "one_back.hair"],
    ["upsample", "one.gks", "--method", "parting", "--out", "one_high.map", "--weights-out", "w.map"],
    ["refine", "one.gks", "--seed", 9, "--out", "one_refined.obj"],
    ["metrics", "one_refined.obj", "--voxels", 32],
]


@criterion(10)
def test_seeded_commands_byte_identical(tmp_path):
    trees, logs = [], []
    for run, threads in enumerate((1, 1, 8)):
        d = tmp_path / f"run{run}"
        d.mkdir()
        logs.append([_cli(c, d, threads) for c in SEEDED_COMMANDS])
        trees.append(_tree_bytes(d))
    assert trees[0] == trees[1] == trees[2]
    assert logs[0] == logs[1] == logs[2]


@criterion(10)
def test_default_pipeline_deterministic_and_clean(fitted, tmp_path):
    models = tmp_path / "models"
    models.mkdir()
    latent.save_model(models / "strand.pca", fitted["sm"])
    latent.save_model(models / "hairstyle.pca", fitted["hm"])
    finals = []
    for threads in (1, 8):
        d = tmp_path / f"t{threads}"
        d.mkdir()
        _cli(["sample", "--model", models, "--seed", 1, "--out", "low.gks", "--map-out", "low.map"], d, threads)
        _cli(["upsample", "low.map", "--method", "parting", "--out", "high.map"], d, threads)
        _cli(["refine", "high.map", "--out", "final.gks"], d, threads)
        finals.append(d)
    assert (finals[0] / "high.map").read_bytes() == (finals[1] / "high.map").read_bytes()
    assert (finals[0] / "final.gks").read_bytes() == (finals[1] / "final.gks").read_bytes()
    occupied = int((scalp.read_grid(finals[0] / "high.map")[..., -1] > 0.5).sum())
    g, _ = read_groom(finals[0] / "final.gks")
    assert len(g) == 6 * occupied
    assert penetration_rate(g) == 0.0

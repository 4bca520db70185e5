"""Command-line front end.

    groomkit gen       recipe config -> groom (or --count N -> dataset dir)
    groomkit encode    groom -> strand map (or latent map with --model)
    groomkit decode    strand/latent map -> groom
    groomkit fit       dataset dir -> strand.pca + hairstyle.pca
    groomkit sample    models + seed -> groom
    groomkit upsample  low map or groom -> high map (+ weight map)
    groomkit refine    groom or map + params -> refined groom
    groomkit metrics   groom [vs reference] -> report
    groomkit export    groom format conversion
"""

from __future__ import annotations

import argparse
import sys
from itertools import islice
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import codec, config, densify, latent, metrics, refine, scalp, synth
from .groom import Groom
from .io import FORMATS, GroomFileError, read_groom, write_groom
from .scalp import GRID_MAGIC_F32, GRID_MAGIC_F64

RESOLUTIONS = {"low": scalp.LOW, "high": scalp.HIGH}
GROOM_SUFFIXES = (".gks", ".obj", ".hair")


class CliError(Exception):
    pass


def _is_grid(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) in (GRID_MAGIC_F32, GRID_MAGIC_F64)


def _load_groom(path, fmt=None) -> Groom:
    g, resampled = read_groom(path, fmt)
    if resampled:
        print(f"note: resampled {resampled} strand(s) to {g.n_points} points", file=sys.stderr)
    return g


def _load_strand_map(path, strand_model: str | None = None) -> scalp.StrandMap:
    arr = scalp.read_grid(path)
    cfg_dim = codec.DEFAULT.dim
    if arr.shape[-1] == cfg_dim + 1:
        return scalp.strand_map_from_array(arr)
    if arr.shape[-1] == scalp.STRAND_LATENT_DIM + 1:
        if strand_model is None:
            raise CliError(f"{path} is a latent map; pass --model with a strand model")
        return latent.latent_to_strand_map(latent.load_model(strand_model), scalp.LatentMap.from_array(arr))
    raise CliError(f"{path}: grid with {arr.shape[-1]} channels is not a strand or latent map")


def _load_groom_or_map(path, strand_model=None, fmt=None):
    """Return ``(groom, strand_map_or_None)``."""
    if _is_grid(path):
        m = _load_strand_map(path, strand_model)
        return scalp.map_to_groom(m), m
    return _load_groom(path, fmt), None


def _write_map(path, m: scalp.StrandMap) -> None:
    scalp.write_grid(path, scalp.strand_map_to_array(m), precision=64)


def _model_paths(model: str) -> tuple[Path, Path]:
    p = Path(model)
    if p.is_dir():
        return p / "strand.pca", p / "hairstyle.pca"
    raise CliError(f"{model}: expected a model directory written by 'fit'")


def cmd_gen(args) -> int:
    entries = config.read_config(args.params) if args.params else {}
    src = args.params or "<defaults>"
    base = synth.parted_recipe() if args.kind == "parted" else synth.StyleRecipe(kind=args.kind)
    config.check_keys(entries, [synth.StyleRecipe], src)
    if entries:
        if "kind" not in entries:
            entries = {**entries, "kind": (args.kind, 0)}
        recipe = config.build(synth.StyleRecipe, entries, src, seed=args.seed)
    else:
        recipe = replace(base, seed=args.seed) if args.seed is not None else base
    shape = RESOLUTIONS[args.resolution]
    if args.count is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        recipes = [recipe] if args.params else synth.default_recipes()
        per = -(-args.count // (len(recipes) * (1 if args.no_mirror else 2)))
        grooms = synth.iter_dataset(recipes, per, seed=recipe.seed, mirror=not args.no_mirror, shape=shape)
        ext = {"native": ".gks", "obj": ".obj", "hair": ".hair"}[args.format or "native"]
        written = 0
        for i, g in enumerate(islice(grooms, args.count)):
            write_groom(out / f"groom_{i:04d}{ext}", g, args.format)
            written += 1
        print(f"wrote {written} grooms to {out}")
        return 0
    g = synth.generate_groom(recipe, shape)
    write_groom(args.out, g, args.format)
    print(f"wrote {len(g)} strands to {args.out}")
    return 0


def cmd_encode(args) -> int:
    g = _load_groom(args.input, args.in_format)
    m, skipped = scalp.groom_to_map(g, RESOLUTIONS[args.resolution])
    if skipped:
        print(f"note: skipped {skipped} strand(s) rooted off the scalp chart", file=sys.stderr)
    if args.model:
        sm = latent.load_model(args.model)
        scalp.write_grid(args.out, latent.strand_map_to_latent(sm, m).to_array(), precision=64)
    else:
        _write_map(args.out, m)
    print(f"encoded {m.occupied} strand(s) into {args.out}")
    return 0


def cmd_decode(args) -> int:
    m = _load_strand_map(args.input, args.model)
    g = scalp.map_to_groom(m)
    write_groom(args.out, g, args.format)
    print(f"decoded {len(g)} strand(s) to {args.out}")
    return 0


def _dataset_files(directory) -> list[Path]:
    files = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in GROOM_SUFFIXES)
    if not files:
        raise CliError(f"{directory}: no groom files found")
    return files


def cmd_fit(args) -> int:
    files = _dataset_files(args.input)
    maps = [scalp.groom_to_map(_load_groom(f))[0] for f in files]
    sm, hm = latent.fit_models(maps, args.strand_components, args.hairstyle_components,
                               args.strand_samples, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    latent.save_model(out / "strand.pca", sm)
    latent.save_model(out / "hairstyle.pca", hm)
    n_codes = min(args.strand_samples, sum(m.occupied for m in maps))
    print(f"fit strand PCA ({sm.components}) on {n_codes} codes and hairstyle PCA "
          f"({hm.components}) on {len(maps)} maps -> {out}")
    return 0


def cmd_sample(args) -> int:
    sp, hp = _model_paths(args.model)
    sm, hm = latent.load_model(sp), latent.load_model(hp)
    lm = latent.sample_hairstyle(hm, args.seed)
    m = latent.latent_to_strand_map(sm, lm)
    if args.map_out:
        _write_map(args.map_out, m)
    g = scalp.map_to_groom(m)
    write_groom(args.out, g, args.format)
    print(f"sampled {len(g)} guide strand(s) to {args.out}")
    return 0


def cmd_upsample(args) -> int:
    if _is_grid(args.input):
        low = _load_strand_map(args.input, args.model)
    else:
        low, skipped = scalp.groom_to_map(_load_groom(args.input, args.in_format), scalp.LOW)
    if low.shape != scalp.LOW:
        raise CliError(f"{args.input}: expected a {scalp.LOW} low-resolution map, got {low.shape}")
    if args.method == "nearest":
        high, w = densify.upsample_nearest(low)
    elif args.method == "bilinear":
        high, w = densify.upsample_bilinear(low)
    else:
        high, w = densify.upsample_parting_aware(low, args.threshold)
    _write_map(args.out, high)
    if args.weights_out:
        scalp.write_grid(args.weights_out, w.weights, precision=64)
    if args.std_out:
        densify.write_pgm(args.std_out, densify.weight_std_map(w, low.shape), vmax=0.5)
    print(f"upsampled to {high.occupied} strand(s) ({args.method}) -> {args.out}")
    return 0


def cmd_refine(args) -> int:
    g, _ = _load_groom_or_map(args.input, args.model, args.in_format)
    entries = config.read_config(args.params) if args.params else {}
    src = args.params or "<defaults>"
    config.check_keys(entries, [refine.RefineParams, refine.PenetrationParams], src)
    rp = config.build(refine.RefineParams, entries, src, seed=args.seed)
    pp = config.build(refine.PenetrationParams, entries, src)
    out, stats = refine.refine(g, rp, pp, final_pass=not args.no_final_pass)
    write_groom(args.out, out, args.format)
    print(f"refined {stats['input']} -> {stats['output']} strand(s) "
          f"(removed {stats['removed_initial']} + {stats['removed_final']}) -> {args.out}")
    return 0


def cmd_metrics(args) -> int:
    g, _ = _load_groom_or_map(args.input, args.model)
    ref = None
    if args.reference:
        ref, _ = _load_groom_or_map(args.reference, args.model)
    rep = metrics.report(g, ref, resolution=args.voxels)
    print(metrics.format_report(rep, args.report))
    return 0


def cmd_export(args) -> int:
    g, _ = _load_groom_or_map(args.input, args.model, args.in_format)
    write_groom(args.out, g, args.format)
    print(f"exported {len(g)} strand(s) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groomkit", description="Strand-hair codec, densification and metrics.")
    sub = p.add_subparsers(dest="command", required=True)

    def out_args(sp, groom_out=True):
        sp.add_argument("--out", required=True, help="output path")
        if groom_out:
            sp.add_argument("--format", choices=FORMATS, help="output groom format (default: by extension)")

    s = sub.add_parser("gen", help="generate a procedural groom or dataset")
    s.add_argument("--params", help="recipe config file (key = value)")
    s.add_argument("--kind", default="parted", choices=synth.KINDS)
    s.add_argument("--seed", type=int)
    s.add_argument("--resolution", choices=RESOLUTIONS, default="low")
    s.add_argument("--count", type=int, help="write a dataset of this many grooms into --out")
    s.add_argument("--no-mirror", action="store_true")
    out_args(s)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("encode", help="groom -> strand map (or latent map)")
    s.add_argument("input")
    s.add_argument("--resolution", choices=RESOLUTIONS, default="low")
    s.add_argument("--model", help="strand PCA model; writes a latent map")
    s.add_argument("--in-format", choices=FORMATS)
    out_args(s, groom_out=False)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="strand/latent map -> groom")
    s.add_argument("input")
    s.add_argument("--model", help="strand PCA model (for latent maps)")
    out_args(s)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("fit", help="fit strand and hairstyle PCA models on a dataset dir")
    s.add_argument("input")
    s.add_argument("--strand-components", type=int, default=scalp.STRAND_LATENT_DIM)
    s.add_argument("--hairstyle-components", type=int, default=latent.HAIRSTYLE_LATENT_DIM)
    s.add_argument("--strand-samples", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    out_args(s, groom_out=False)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="draw a random hairstyle from fitted models")
    s.add_argument("--model", required=True, help="model directory written by 'fit'")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--map-out", help="also write the decoded low-res strand map")
    out_args(s)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("upsample", help="low-res map or groom -> high-res map")
    s.add_argument("input")
    s.add_argument("--method", choices=("nearest", "bilinear", "parting"), default="parting")
    s.add_argument("--threshold", type=float, default=0.7, help="parting coherence cosine")
    s.add_argument("--model", help="strand PCA model (for latent-map input)")
    s.add_argument("--weights-out", help="write the 5-channel weight map")
    s.add_argument("--std-out", help="write the weight-std map as PGM")
    s.add_argument("--in-format", choices=FORMATS)
    out_args(s, groom_out=False)
    s.set_defaults(func=cmd_upsample)

    s = sub.add_parser("refine", help="penetration, noise, wisps and duplication")
    s.add_argument("input")
    s.add_argument("--params", help="refine/penetration config file")
    s.add_argument("--seed", type=int)
    s.add_argument("--model", help="strand PCA model (for latent-map input)")
    s.add_argument("--no-final-pass", action="store_true", help="skip the last penetration pass")
    s.add_argument("--in-format", choices=FORMATS)
    out_args(s)
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("metrics", help="metric report for a groom")
    s.add_argument("input")
    s.add_argument("--reference")
    s.add_argument("--model", help="strand PCA model (for latent-map input)")
    s.add_argument("--report", choices=("json", "text"), default="json")
    s.add_argument("--voxels", type=int, default=96)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("export", help="convert between groom formats")
    s.add_argument("input")
    s.add_argument("--model", help="strand PCA model (for latent-map input)")
    s.add_argument("--in-format", choices=FORMATS)
    out_args(s)
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, GroomFileError, config.ConfigError, ValueError, OSError) as exc:
        print(f"groomkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

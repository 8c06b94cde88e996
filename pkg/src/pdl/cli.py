"""Command-line toolchain: one subcommand per pipeline stage.

    pdl learn-dict   sample patches, fit ZCA, learn the starting dictionary
    pdl select       pick K exemplar codes and the rescaling transform
    pdl evaluate     encode+pool a dataset, train the SVM, report accuracy
    pdl visualize    render dictionary filters as PPM images
    pdl experiment   multi-run benchmark driver with CSV reports

Exit codes: 0 success, 1 usage error, 2 environment/data error.  Any flag
may also come from a JSON file via --config; explicit flags win.
"""

import argparse
import json
import os
import sys

import numpy as np

from pdl import bench, classifier, dictionary, encoder, nystrom
from pdl import patches as patches_mod
from pdl import selection
from pdl.datasets import DatasetError
from pdl.modelfile import (TAG_DICTIONARY, TAG_EXEMPLARS, TAG_NYSTROM,
                           TAG_WHITENER, ModelFile, ModelFileError)


class UsageError(Exception):
    """Bad arguments or argument combinations (exit 1)."""


class DataError(Exception):
    """Missing or unusable files, datasets or model sections (exit 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_pool_grid(value):
    if isinstance(value, (list, tuple)):
        return int(value[0]), int(value[1])
    try:
        rows, cols = value.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise UsageError(f"--pool-grid expects RxC, got {value!r}")


def _parse_lambda_grid(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise UsageError(f"--lambda-grid expects comma-separated floats, "
                         f"got {value!r}")


def _merge_config(args):
    """Fill argparse None values from the JSON file given by --config."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}")
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, value)
    return args


def _dflt(args, **defaults):
    for key, value in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)


def _load_split(args, split):
    cfg = bench.ExperimentConfig(dataset=args.dataset,
                                 data_dir=args.data_dir)
    try:
        return bench.load_split(cfg, split)
    except (OSError, DatasetError) as exc:
        raise DataError(f"cannot load {args.dataset} {split} split: {exc}")


def _load_model(path, *tags):
    try:
        mf = ModelFile.load(path)
    except (OSError, ModelFileError) as exc:
        raise DataError(f"cannot load model file: {exc}")
    for tag in tags:
        if not mf.has(tag):
            raise DataError(f"model file {path} lacks the "
                            f"{tag.decode()} section")
    return mf


def cmd_learn_dict(args):
    _dflt(args, dataset="cifar10", data_dir=".", patch_side=6, seed=0,
          epsilon=patches_mod.DEFAULT_EPSILON, bias=patches_mod.DEFAULT_BIAS,
          patch_samples=400_000, kmeans_iters=50, method="kmeans")
    if args.method not in ("kmeans", "random"):
        raise UsageError("learn-dict method must be kmeans or random")
    train = _load_split(args, "train")
    raw = patches_mod.sample_random(train, args.patch_side,
                                    args.patch_samples, args.seed)
    normalized = patches_mod.contrast_normalize(raw, args.bias)
    whitener = patches_mod.fit_zca(normalized, args.epsilon)
    whitened = patches_mod.apply_zca(whitener, normalized)
    if args.method == "random":
        codes = dictionary.random_dictionary(whitened, args.m, args.seed)
    else:
        codes = dictionary.kmeans_spherical(whitened, args.m,
                                            args.kmeans_iters, args.seed)
    mf = ModelFile()
    mf.set_whitener(whitener)
    mf.set_dictionary(codes)
    _save_model(mf, args.out)
    print(f"learned {codes.size} codes of dim {codes.dim} -> {args.out}")
    return 0


def cmd_select(args):
    _dflt(args, dataset="cifar10", data_dir=".", alpha=0.25,
          pool_grid="2x2", pool_op="avg", stride=1, samples=100_000,
          seed=0, bias=patches_mod.DEFAULT_BIAS,
          damping=selection.DEFAULT_DAMPING,
          ap_max_iters=selection.DEFAULT_MAX_ITERS,
          ap_window=selection.DEFAULT_CONVERGENCE_WINDOW,
          search_budget=selection.DEFAULT_SEARCH_BUDGET)
    mf = _load_model(args.model, TAG_WHITENER, TAG_DICTIONARY)
    codes = mf.get_dictionary()
    whitener = mf.get_whitener()
    if args.k > codes.size:
        raise UsageError(f"--k {args.k} exceeds dictionary size "
                         f"{codes.size}")
    enc_cfg = encoder.EncoderConfig(alpha=args.alpha,
                                    pool_grid=_parse_pool_grid(args.pool_grid),
                                    pool_op=args.pool_op, stride=args.stride)
    train = _load_split(args, "train")
    regions = encoder.sample_pooled_regions(codes, train, enc_cfg, whitener,
                                            args.bias, args.samples,
                                            args.seed)
    cov = selection.estimate_covariance(regions)
    exemplars = selection.select_k_exemplars(
        cov, args.k, damping=args.damping, max_iters=args.ap_max_iters,
        convergence_window=args.ap_window, search_budget=args.search_budget)
    transform = nystrom.fit_transform_matrix(cov, exemplars)
    mf.set_exemplars(exemplars)
    mf.set_nystrom(transform)
    _save_model(mf, args.model)
    print(f"selected {exemplars.k} of {codes.size} codes "
          f"(preference {exemplars.preference_used:.6g}) -> {args.model}")
    return 0


def cmd_evaluate(args):
    _dflt(args, dataset="cifar10", data_dir=".", alpha=0.25,
          pool_grid="2x2", pool_op="avg", stride=1, rescale="on",
          bias=patches_mod.DEFAULT_BIAS, lambda_grid="1e-4,1e-3,1e-2,1e-1,1,10",
          cv_folds=5, svm_max_iter=500, seed=0, out="results.csv")
    if args.rescale not in ("on", "off"):
        raise UsageError("--rescale must be on or off")
    mf = _load_model(args.model, TAG_WHITENER, TAG_DICTIONARY)
    whitener = mf.get_whitener()
    codes = mf.get_dictionary()
    transform = None
    if mf.has(TAG_EXEMPLARS):
        exemplars = mf.get_exemplars()
        codes = codes.subset(exemplars.indices)
        if args.rescale == "on":
            if not mf.has(TAG_NYSTROM):
                raise DataError("model has exemplars but no rescaling "
                                "transform; rerun select or use "
                                "--rescale off")
            transform = mf.get_nystrom()
    enc_cfg = encoder.EncoderConfig(alpha=args.alpha,
                                    pool_grid=_parse_pool_grid(args.pool_grid),
                                    pool_op=args.pool_op, stride=args.stride)
    train = _load_split(args, "train")
    test = _load_split(args, "test")
    pooled_train = encoder.encode_and_pool_images(codes, train.images,
                                                  enc_cfg, whitener,
                                                  args.bias)
    pooled_test = encoder.encode_and_pool_images(codes, test.images,
                                                 enc_cfg, whitener,
                                                 args.bias)
    if transform is not None:
        pooled_train = nystrom.rescale_pooled(transform, pooled_train,
                                              enc_cfg.n_cells)
        pooled_test = nystrom.rescale_pooled(transform, pooled_test,
                                             enc_cfg.n_cells)
    grid = _parse_lambda_grid(args.lambda_grid)
    if len(grid) > 1:
        lam = classifier.cross_validate_lambda(
            pooled_train, train.labels, grid, args.cv_folds,
            args.svm_max_iter, args.seed)
    else:
        lam = grid[0]
    model = classifier.train_ovr_svm(pooled_train, train.labels, lam,
                                     args.svm_max_iter)
    accuracy = classifier.evaluate(model, pooled_test, test.labels)
    mf.set_svm(model)
    _save_model(mf, args.model)
    print(f"accuracy {accuracy:.4f} (lambda {lam:g}, "
          f"{codes.size} codes)")
    _append_csv_row(args.out, args.dataset, codes.size,
                    args.rescale == "on" and transform is not None,
                    lam, accuracy)
    return 0


def _append_csv_row(path, dataset, n_codes, rescaled, lam, accuracy):
    try:
        new = not os.path.exists(path)
        with open(path, "a") as fh:
            if new:
                fh.write("dataset,codes,rescaled,lambda,accuracy\n")
            fh.write(f"{dataset},{n_codes},{int(rescaled)},{lam:g},"
                     f"{accuracy:.6f}\n")
    except OSError as exc:
        raise DataError(f"cannot write results CSV: {exc}")


def _save_model(mf, path):
    try:
        mf.save(path)
    except OSError as exc:
        raise DataError(f"cannot write model file: {exc}")


def write_ppm(path, rgb):
    """Binary PPM (P6) writer for an (h, w, 3) uint8 array."""
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(rgb).tobytes())


def render_code_tiles(codes, whitener):
    """Un-whitened display tiles, one per code: (m, side, side, 3) uint8.

    Each code is mapped back toward pixel space with the whitener's
    inverse transform and linearly scaled per code to use the full [0,
    255] range; zero-range (dead) codes render mid-gray.
    """
    inv = whitener.inverse_transform_matrix()
    side, channels = codes.patch_side, codes.channels
    if side == 0:
        raise DataError("dictionary has no image geometry to render")
    display = codes.codes @ inv  # inverse transform is symmetric
    m = codes.size
    tiles = np.full((m, side, side, 3), 128, dtype=np.uint8)
    for i in range(m):
        vec = display[i]
        lo, hi = vec.min(), vec.max()
        if hi - lo < 1e-12:
            continue
        scaled = np.floor((vec - lo) / (hi - lo) * 255.0 + 0.5)
        planar = scaled.reshape(channels, side, side)
        tiles[i] = (planar.transpose(1, 2, 0) if channels == 3
                    else np.repeat(planar[0][:, :, None], 3, axis=2))
    return tiles


def tile_grid(tiles, cols=None, pad=1):
    """Arrange tiles into a grid image with 1px black separators."""
    m, side = tiles.shape[0], tiles.shape[1]
    if cols is None:
        cols = int(np.ceil(np.sqrt(m)))
    rows = (m + cols - 1) // cols
    height = rows * side + (rows - 1) * pad
    width = cols * side + (cols - 1) * pad
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    for i in range(m):
        r, c = divmod(i, cols)
        y, x = r * (side + pad), c * (side + pad)
        canvas[y:y + side, x:x + side] = tiles[i]
    return canvas


def cmd_visualize(args):
    _dflt(args, out_dir=".")
    mf = _load_model(args.model, TAG_WHITENER, TAG_DICTIONARY)
    codes = mf.get_dictionary()
    whitener = mf.get_whitener()
    tiles = render_code_tiles(codes, whitener)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        filters_path = os.path.join(args.out_dir, "filters.ppm")
        write_ppm(filters_path, tile_grid(tiles))
    except OSError as exc:
        raise DataError(f"cannot write visualization: {exc}")
    written = [filters_path]

    if mf.has(TAG_EXEMPLARS):
        exemplars = mf.get_exemplars()
        clusters = sorted(
            (ex for ex in exemplars.indices),
            key=lambda ex: (-exemplars.members(ex).size, ex))
        side = codes.patch_side
        depth = max(exemplars.members(ex).size for ex in clusters)
        strip = np.full((depth * (side + 1) - 1,
                         len(clusters) * (side + 1) - 1, 3), 128,
                        dtype=np.uint8)
        for col, ex in enumerate(clusters):
            members = exemplars.members(ex)
            ordered = [ex] + [int(i) for i in members if i != ex]
            for row, idx in enumerate(ordered):
                y, x = row * (side + 1), col * (side + 1)
                strip[y:y + side, x:x + side] = tiles[idx]
        clusters_path = os.path.join(args.out_dir, "clusters.ppm")
        try:
            write_ppm(clusters_path, strip)
        except OSError as exc:
            raise DataError(f"cannot write visualization: {exc}")
        written.append(clusters_path)
    print("wrote " + ", ".join(written))
    return 0


def cmd_experiment(args):
    _dflt(args, dataset="cifar10", data_dir=".", method="kmeans,pdl",
          m=1600, k=200, runs=5, seed=0, alpha=0.25, pool_grid="2x2",
          pool_op="avg", stride=1, samples=100_000, patch_samples=400_000,
          kmeans_iters=50, epsilon=patches_mod.DEFAULT_EPSILON,
          bias=patches_mod.DEFAULT_BIAS, rescale="on",
          lambda_grid="1e-4,1e-3,1e-2,1e-1,1,10", cv_folds=5,
          svm_max_iter=500, out_dir="results", train_limit=0, test_limit=0)
    methods = [m.strip() for m in args.method.split(",")]
    for method in methods:
        if method not in bench.METHODS:
            raise UsageError(f"unknown method {method!r}")
    results = []
    train = test = None
    for method in methods:
        cfg = bench.ExperimentConfig(
            dataset=args.dataset, data_dir=args.data_dir, method=method,
            patch_side=args.patch_side or 6, stride=args.stride,
            alpha=args.alpha, pool_grid=_parse_pool_grid(args.pool_grid),
            pool_op=args.pool_op, m_start=args.m, k_final=args.k,
            n_runs=args.runs, base_seed=args.seed,
            patch_samples=args.patch_samples,
            covariance_samples=args.samples,
            kmeans_iters=args.kmeans_iters, rescale=args.rescale == "on",
            epsilon=args.epsilon, bias=args.bias,
            lambda_grid=_parse_lambda_grid(args.lambda_grid),
            cv_folds=args.cv_folds, svm_max_iter=args.svm_max_iter,
            train_limit=args.train_limit or None,
            test_limit=args.test_limit or None,
            collect_diagnostics=bool(args.diagnostics))
        try:
            cfg.validate()
        except ValueError as exc:
            raise UsageError(str(exc))
        if train is None:
            try:
                train = bench.load_split(cfg, "train")
                test = bench.load_split(cfg, "test")
            except (OSError, DatasetError) as exc:
                raise DataError(f"cannot load dataset: {exc}")
        result = bench.run_experiment(cfg, train, test)
        print(f"{result.label}: mean {result.mean:.4f} "
              f"std {result.std:.4f} ({result.accuracies})")
        results.append(result)
    try:
        written = bench.emit_report(results, args.out_dir)
    except OSError as exc:
        raise DataError(f"cannot write report: {exc}")
    print("wrote " + ", ".join(written))
    return 0


def build_parser():
    parser = _Parser(prog="pdl", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(handler=handler)
        p.add_argument("--config", help="JSON file with default flag values")
        return p

    p = add("learn-dict", cmd_learn_dict,
            help="learn whitening and the starting dictionary")
    p.add_argument("--dataset", choices=["cifar10", "stl10"])
    p.add_argument("--data-dir")
    p.add_argument("--patch-side", type=int)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--method", choices=["kmeans", "random"])
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--bias", type=float)
    p.add_argument("--patch-samples", type=int)
    p.add_argument("--kmeans-iters", type=int)
    p.add_argument("--out", required=True)

    p = add("select", cmd_select,
            help="select K exemplar codes into the model file")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--dataset", choices=["cifar10", "stl10"])
    p.add_argument("--data-dir")
    p.add_argument("--alpha", type=float)
    p.add_argument("--pool-grid")
    p.add_argument("--pool-op", choices=["avg", "max"])
    p.add_argument("--stride", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bias", type=float)
    p.add_argument("--damping", type=float)
    p.add_argument("--ap-max-iters", type=int)
    p.add_argument("--ap-window", type=int)
    p.add_argument("--search-budget", type=int)

    p = add("evaluate", cmd_evaluate,
            help="train the SVM over pooled features and print accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", choices=["cifar10", "stl10"])
    p.add_argument("--data-dir")
    p.add_argument("--alpha", type=float)
    p.add_argument("--pool-grid")
    p.add_argument("--pool-op", choices=["avg", "max"])
    p.add_argument("--stride", type=int)
    p.add_argument("--rescale", choices=["on", "off"])
    p.add_argument("--bias", type=float)
    p.add_argument("--lambda-grid")
    p.add_argument("--cv-folds", type=int)
    p.add_argument("--svm-max-iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("visualize", cmd_visualize,
            help="render dictionary filters as PPM images")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir")

    p = add("experiment", cmd_experiment,
            help="run the multi-method benchmark and emit reports")
    p.add_argument("--dataset", choices=["cifar10", "stl10"])
    p.add_argument("--data-dir")
    p.add_argument("--method", help="comma-separated subset of "
                                    "kmeans,pdl,pca,random")
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--patch-side", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--pool-grid")
    p.add_argument("--pool-op", choices=["avg", "max"])
    p.add_argument("--samples", type=int)
    p.add_argument("--patch-samples", type=int)
    p.add_argument("--kmeans-iters", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--bias", type=float)
    p.add_argument("--rescale", choices=["on", "off"])
    p.add_argument("--lambda-grid")
    p.add_argument("--cv-folds", type=int)
    p.add_argument("--svm-max-iter", type=int)
    p.add_argument("--train-limit", type=int)
    p.add_argument("--test-limit", type=int)
    p.add_argument("--diagnostics", action="store_true", default=None)
    p.add_argument("--out-dir")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end experiment driver: baseline vs selection vs PCA bound.

One experiment runs the full pipeline n times with per-run seeds and
aggregates test accuracy; a report renders result tables plus the
eigenvalue and correlation diagnostic series as CSV.
"""

import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from pdl import classifier, datasets, dictionary, encoder, nystrom
from pdl import patches as patches_mod
from pdl import selection

METHODS = ("kmeans", "pdl", "pca", "random")
FINAL_IMAGE_SIDE = 32  # STL images are resized to this per the protocol


@dataclass
class ExperimentConfig:
    dataset: str = "cifar10"            # cifar10 | stl10
    data_dir: str = "."
    method: str = "pdl"                 # kmeans | pdl | pca | random
    patch_side: int = 6
    stride: int = 1
    alpha: float = 0.25
    pool_grid: tuple = (2, 2)
    pool_op: str = "avg"
    m_start: int = 1600
    k_final: int = 200
    n_runs: int = 5
    seeds: tuple = None                 # default: base_seed, base_seed+1, ..
    base_seed: int = 0
    patch_samples: int = 400_000
    covariance_samples: int = 100_000
    kmeans_iters: int = 50
    rescale: bool = True
    epsilon: float = 0.1
    bias: float = 10.0
    lambda_grid: tuple = classifier.DEFAULT_LAMBDA_GRID
    cv_folds: int = 5
    svm_max_iter: int = 500
    ap_damping: float = selection.DEFAULT_DAMPING
    ap_max_iters: int = selection.DEFAULT_MAX_ITERS
    ap_window: int = selection.DEFAULT_CONVERGENCE_WINDOW
    search_budget: int = selection.DEFAULT_SEARCH_BUDGET
    train_limit: int = None             # fast-profile subsampling
    test_limit: int = None
    collect_diagnostics: bool = False
    correlation_pairs: int = 1000

    def validate(self):
        if self.dataset not in ("cifar10", "stl10"):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.k_final > self.m_start:
            raise ValueError("k_final must not exceed m_start")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.n_runs:
            raise ValueError("seeds must match n_runs when given")
        if self.pool_op not in encoder.POOL_OPS:
            raise ValueError(f"pool_op must be one of {encoder.POOL_OPS}")
        if self.patch_side < 1 or self.stride < 1:
            raise ValueError("patch_side and stride must be >= 1")

    def run_seeds(self):
        if self.seeds is not None:
            return tuple(self.seeds)
        return tuple(self.base_seed + i for i in range(self.n_runs))

    def encoder_config(self):
        return encoder.EncoderConfig(alpha=self.alpha,
                                     pool_grid=tuple(self.pool_grid),
                                     pool_op=self.pool_op,
                                     stride=self.stride)

    def dictionary_size(self):
        return self.m_start if self.method in ("pdl", "pca") else self.k_final


@dataclass
class ExperimentResult:
    config: dict
    accuracies: list
    mean: float
    std: float
    lambdas: list
    seeds_used: list
    timings: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def label(self):
        cfg = self.config
        if cfg["method"] in ("kmeans", "random"):
            return cfg["method"]
        factor = cfg["m_start"] // max(cfg["k_final"], 1)
        return f"{factor}x {cfg['method']}"


def _stage_seed(run_seed, stage):
    """Independent 32-bit seed per (run, pipeline stage)."""
    return int(np.random.SeedSequence([run_seed, stage]).generate_state(1)[0])


def load_split(cfg, split):
    """Load the train or test split named by the config.

    CIFAR-10 uses the standard batch file names; STL-10 uses the binary
    X/y pairs and is resized to 32x32.
    """
    d = cfg.data_dir
    if cfg.dataset == "cifar10":
        if split == "train":
            paths = [os.path.join(d, f"data_batch_{i}.bin")
                     for i in range(1, 6)]
        else:
            paths = [os.path.join(d, "test_batch.bin")]
        return datasets.load_cifar10(paths, split)
    prefix = "train" if split == "train" else "test"
    ds = datasets.load_stl10(os.path.join(d, f"{prefix}_X.bin"),
                             os.path.join(d, f"{prefix}_y.bin"), split)
    return datasets.resize_dataset(ds, FINAL_IMAGE_SIDE, FINAL_IMAGE_SIDE)


def run_experiment(cfg, train=None, test=None):
    """Run the configured pipeline cfg.n_runs times and aggregate.

    `train`/`test` may be passed to reuse already-loaded datasets (the
    report driver shares them across methods).
    """
    cfg.validate()
    if train is None:
        train = load_split(cfg, "train")
    if test is None:
        test = load_split(cfg, "test")

    accuracies = []
    lambdas = []
    timings = {}
    diagnostics = {}
    for run, seed in enumerate(cfg.run_seeds()):
        acc, lam, run_timings, diag = _single_run(cfg, train, test, seed)
        accuracies.append(acc)
        lambdas.append(lam)
        for stage, dt in run_timings.items():
            timings[stage] = timings.get(stage, 0.0) + dt
        if run == 0 and diag:
            diagnostics = diag
    accs = np.array(accuracies)
    return ExperimentResult(
        config=asdict(cfg), accuracies=list(map(float, accs)),
        mean=float(accs.mean()), std=float(accs.std()),
        lambdas=lambdas, seeds_used=list(cfg.run_seeds()),
        timings=timings, diagnostics=diagnostics)


def _single_run(cfg, train, test, seed):
    enc_cfg = cfg.encoder_config()
    timings = {}
    diagnostics = {}

    def timed(stage, fn, *args, **kwargs):
        start = time.perf_counter()
        out = fn(*args, **kwargs)
        timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - start
        return out

    if cfg.train_limit:
        train = datasets.subsample(train, cfg.train_limit,
                                   _stage_seed(seed, 0))
    if cfg.test_limit:
        test = datasets.subsample(test, cfg.test_limit, _stage_seed(seed, 1))

    raw = timed("patches", patches_mod.sample_random, train, cfg.patch_side,
                cfg.patch_samples, _stage_seed(seed, 2))
    normalized = patches_mod.contrast_normalize(raw, cfg.bias)
    whitener = timed("whitening", patches_mod.fit_zca, normalized,
                     cfg.epsilon)
    whitened = patches_mod.apply_zca(whitener, normalized)
    del raw, normalized

    if cfg.method == "random":
        codes = timed("dictionary", dictionary.random_dictionary, whitened,
                      cfg.dictionary_size(), _stage_seed(seed, 3))
    else:
        codes = timed("dictionary", dictionary.kmeans_spherical, whitened,
                      cfg.dictionary_size(), cfg.kmeans_iters,
                      _stage_seed(seed, 3))

    rescale_transform = None
    pca_transform = None
    final_codes = codes
    if cfg.method in ("pdl", "pca"):
        regions = timed("regions", encoder.sample_pooled_regions, codes,
                        train, enc_cfg, whitener, cfg.bias,
                        cfg.covariance_samples, _stage_seed(seed, 4))
        if cfg.method == "pdl":
            cov = selection.estimate_covariance(regions)
            exemplars = timed(
                "selection", selection.select_k_exemplars, cov, cfg.k_final,
                cfg.ap_damping, cfg.ap_max_iters, cfg.ap_window,
                cfg.search_budget)
            transform = nystrom.fit_transform_matrix(cov, exemplars)
            final_codes = codes.subset(exemplars.indices)
            if cfg.rescale:
                rescale_transform = transform
            if cfg.collect_diagnostics:
                recon = nystrom.nystrom_reconstruct(cov, exemplars.indices)
                pp_raw = patches_mod.sample_random(
                    train, cfg.patch_side, min(20_000, cfg.patch_samples),
                    _stage_seed(seed, 6))
                pp_white = patches_mod.apply_zca(
                    whitener, patches_mod.contrast_normalize(pp_raw,
                                                             cfg.bias))
                patch_acts = encoder.encode_patches(codes, pp_white,
                                                    cfg.alpha)
                stats = nystrom.correlation_stats(
                    regions, patch_acts, exemplars, cfg.correlation_pairs,
                    _stage_seed(seed, 7))
                diagnostics = {
                    "spectrum_original": nystrom.spectrum(cov.C),
                    "spectrum_reconstruction": nystrom.spectrum(recon),
                    "correlations": stats,
                }
        else:
            pca_transform = timed("selection", nystrom.fit_pca, regions,
                                  cfg.k_final)
        del regions

    pooled_train = timed("encoding", encoder.encode_and_pool_images,
                         final_codes, train.images, enc_cfg, whitener,
                         cfg.bias)
    pooled_test = timed("encoding", encoder.encode_and_pool_images,
                        final_codes, test.images, enc_cfg, whitener,
                        cfg.bias)
    if rescale_transform is not None:
        pooled_train = nystrom.rescale_pooled(rescale_transform,
                                              pooled_train, enc_cfg.n_cells)
        pooled_test = nystrom.rescale_pooled(rescale_transform, pooled_test,
                                             enc_cfg.n_cells)
    if pca_transform is not None:
        pooled_train = nystrom.pca_pooled(pca_transform, pooled_train,
                                          enc_cfg.n_cells)
        pooled_test = nystrom.pca_pooled(pca_transform, pooled_test,
                                         enc_cfg.n_cells)

    if len(cfg.lambda_grid) > 1:
        lam = timed("classifier", classifier.cross_validate_lambda,
                    pooled_train, train.labels, cfg.lambda_grid,
                    cfg.cv_folds, cfg.svm_max_iter, _stage_seed(seed, 5))
    else:
        lam = float(cfg.lambda_grid[0])
    model = timed("classifier", classifier.train_ovr_svm, pooled_train,
                  train.labels, lam, cfg.svm_max_iter)
    accuracy = classifier.evaluate(model, pooled_test, test.labels)
    return accuracy, lam, timings, diagnostics


def emit_report(results, out_dir):
    """Render result rows and diagnostic series as CSV plus a manifest.

    Returns the list of files written.  The delta column compares each
    row against the kmeans baseline with the same dataset and k_final
    when one is present among `results`.
    """
    if not results:
        raise ValueError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    baselines = {}
    for res in results:
        cfg = res.config
        if cfg["method"] == "kmeans":
            baselines[(cfg["dataset"], cfg["k_final"])] = res.mean

    table_path = os.path.join(out_dir, "report.csv")
    with open(table_path, "w") as fh:
        fh.write("task,method,m_start,k_final,mean,std,delta_vs_baseline\n")
        for res in results:
            cfg = res.config
            base = baselines.get((cfg["dataset"], cfg["k_final"]))
            delta = ""
            if base is not None and cfg["method"] != "kmeans":
                delta = f"{res.mean - base:.4f}"
            fh.write(f"{cfg['dataset']},{res.label},{cfg['m_start']},"
                     f"{cfg['k_final']},{res.mean:.4f},{res.std:.4f},"
                     f"{delta}\n")
    written.append(table_path)

    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w") as fh:
        for res in results:
            fh.write(f"[{res.label}]\n")
            for key, value in sorted(res.config.items()):
                fh.write(f"{key} = {value}\n")
            fh.write(f"seeds = {res.seeds_used}\n")
            fh.write(f"accuracies = {res.accuracies}\n")
            fh.write(f"lambdas = {res.lambdas}\n")
            for stage, dt in res.timings.items():
                fh.write(f"time_{stage} = {dt:.2f}s\n")
            fh.write("\n")
    written.append(manifest_path)

    for res in results:
        if not res.diagnostics:
            continue
        tag = res.label.replace(" ", "_")
        diag = res.diagnostics
        spec_path = os.path.join(out_dir, f"eigenvalues_{tag}.csv")
        with open(spec_path, "w") as fh:
            fh.write("rank,original,reconstruction\n")
            series = zip(diag["spectrum_original"],
                         diag["spectrum_reconstruction"])
            for i, (a, b) in enumerate(series):
                fh.write(f"{i},{a:.10g},{b:.10g}\n")
        written.append(spec_path)
        stats = diag.get("correlations")
        if stats is not None:
            corr_path = os.path.join(out_dir, f"correlations_{tag}.csv")
            with open(corr_path, "w") as fh:
                fh.write("kind,value\n")
                for kind, values in (
                        ("within_patch", stats.within_patch),
                        ("within_pooled", stats.within_pooled),
                        ("between_pooled", stats.between_pooled)):
                    for v in values:
                        fh.write(f"{kind},{v:.8g}\n")
            written.append(corr_path)
    return written

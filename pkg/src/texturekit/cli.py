"""Command-line entry point: ``texturekit {index,synth,extract,fit,evaluate}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import descriptors, evaluation, imgio
from .classify import format_lda, lda_fit
from .descriptors import DESCRIPTORS, DescriptorConfig
from .reduction import RetentionPolicy, format_pca, pca_fit

COMMANDS = ("index", "synth", "extract", "fit", "evaluate")
SPECTRUM_CHOICES = imgio.SPECTRA + ("all",)
DEFAULT_RADII = (1, 2, 3, 4, 5, 6, 7, 8)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    command: str
    dataset: Optional[str] = None
    features: Optional[str] = None
    layout: str = imgio.DEFAULT_LAYOUT
    spectrum: str = "all"
    descriptor: str = "mslbp"
    neighbors: int = 8
    radii: tuple = DEFAULT_RADII
    shift_bound: int = 3
    protocol: str = "6/6"
    seed: int = 42
    pca: str = "0.95"
    output: Optional[str] = None
    no_timing: bool = False
    classes: int = 10
    samples: int = 12
    size: int = 64
    plain: bool = False

    @property
    def descriptor_config(self) -> DescriptorConfig:
        return DescriptorConfig(self.neighbors, self.radii, self.shift_bound)

    @property
    def retention(self) -> RetentionPolicy:
        return parse_pca_policy(self.pca)

    def to_argv(self) -> list[str]:
        """Canonical flag list; ``parse_args(cfg.to_argv()) == cfg``."""
        argv = [self.command]
        spec = _FLAGS[self.command]
        for dest, flag in spec:
            value = getattr(self, dest)
            if isinstance(value, bool):
                if value:
                    argv.append(flag)
            elif value is not None:
                if dest == "radii":
                    value = ",".join(_fmt_radius(r) for r in value)
                argv += [flag, str(value)]
        return argv


_COMMON = [("layout", "--layout"), ("spectrum", "--spectrum")]
_DESC = [
    ("descriptor", "--descriptor"), ("neighbors", "--neighbors"),
    ("radii", "--radii"), ("shift_bound", "--shift-bound"),
]
_FLAGS = {
    "index": [("dataset", "--dataset")] + _COMMON + [("output", "--output")],
    "synth": [("classes", "--classes"), ("samples", "--samples"), ("size", "--size"),
              ("plain", "--plain"), ("output", "--out")],
    "extract": [("dataset", "--dataset")] + _COMMON + _DESC + [("output", "--output")],
    "fit": [("dataset", "--dataset"), ("features", "--features")] + _COMMON + _DESC
           + [("pca", "--pca"), ("output", "--output")],
    "evaluate": [("dataset", "--dataset")] + _COMMON + _DESC
                + [("protocol", "--protocol"), ("seed", "--seed"), ("pca", "--pca"),
                   ("output", "--output"), ("no_timing", "--no-timing")],
}


def _fmt_radius(r) -> str:
    return str(int(r)) if float(r) == int(r) else repr(float(r))


def parse_pca_policy(text: str) -> RetentionPolicy:
    """``0.95`` keeps 95% of variance; a bare integer such as ``40`` keeps 40 components."""
    try:
        if text.isdigit():
            k = int(text)
            if k < 1:
                raise ValueError
            return RetentionPolicy(components=k)
        frac = float(text)
        return RetentionPolicy(variance=frac)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid --pca value {text!r}: use a variance fraction in (0, 1] or a component count"
        ) from None


def _choice(options, what):
    def check(token):
        if token in options:
            return token
        close = difflib.get_close_matches(token, options, n=1)
        hint = f"; did you mean {close[0]!r}?" if close else f"; choose from {', '.join(options)}"
        raise argparse.ArgumentTypeError(f"unknown {what} {token!r}{hint}")
    return check


def _radii(text):
    try:
        vals = tuple(float(t) for t in text.split(","))
        vals = tuple(int(v) if v == int(v) else v for v in vals)
        DescriptorConfig(radii=vals)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid --radii {text!r}: {exc}") from None
    return vals


def _protocol(text):
    try:
        evaluation.SplitProtocol.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="texturekit", description="LBP-family texture identification toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        return sub.add_parser(name, help=help_text)

    def common(p):
        p.add_argument("--dataset", help="dataset root directory")
        p.add_argument("--layout", default=imgio.DEFAULT_LAYOUT, help="file layout pattern")
        p.add_argument("--spectrum", default="all", type=_choice(SPECTRUM_CHOICES, "spectrum"))

    def desc(p, allow_all=False):
        opts = DESCRIPTORS + (("all",) if allow_all else ())
        p.add_argument("--descriptor", default="mslbp", type=_choice(opts, "descriptor"))
        p.add_argument("--neighbors", type=int, default=8)
        p.add_argument("--radii", type=_radii, default=DEFAULT_RADII, help="comma-separated radii")
        p.add_argument("--shift-bound", dest="shift_bound", type=int, default=3)

    p = add("index", "summarise a dataset tree")
    common(p)
    p.add_argument("--output", help="write the sample index as CSV")

    p = add("synth", "write a synthetic texture corpus")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--samples", type=int, default=12)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--plain", action="store_true", help="write P2 instead of P5")
    p.add_argument("--out", dest="output")

    p = add("extract", "write a feature matrix CSV")
    common(p)
    desc(p)
    p.add_argument("--output")

    p = add("fit", "fit PCA and LDA models")
    common(p)
    p.add_argument("--features", help="feature CSV written by 'extract' (instead of --dataset)")
    desc(p)
    p.add_argument("--pca", default="0.95")
    p.add_argument("--output", help="directory for pca.txt and lda.txt")

    p = add("evaluate", "run identification experiments")
    common(p)
    desc(p, allow_all=True)
    p.add_argument("--protocol", type=_protocol, default="6/6", help="TRAIN/TEST samples per subject")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--pca", default="0.95")
    p.add_argument("--output", help="report CSV path (stdout if omitted)")
    p.add_argument("--no-timing", dest="no_timing", action="store_true")
    return parser


# checked after parsing so that unknown flags are reported first
_REQUIRED = {
    "index": [("dataset", "--dataset")],
    "synth": [("output", "--out")],
    "extract": [("dataset", "--dataset"), ("output", "--output")],
    "fit": [("output", "--output")],
    "evaluate": [("dataset", "--dataset")],
}


def parse_args(argv: Sequence[str]) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    values = {k: v for k, v in vars(ns).items() if v is not None}
    for dest, flag in _REQUIRED[ns.command]:
        if dest not in values:
            raise UsageError(f"texturekit {ns.command}: missing required path {flag}")
    if "pca" in values:
        try:
            parse_pca_policy(values["pca"])
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
    if ns.command == "fit" and not (ns.dataset or ns.features):
        raise UsageError("texturekit fit: one of --dataset or --features is required")
    return CliConfig(**values)


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------

def _spectra(index: imgio.DatasetIndex, wanted: str) -> list[str]:
    order = [s for s in imgio.SPECTRA if s in index.spectra]
    return order if wanted == "all" else [wanted]


def _write(path: Optional[str], text: str, out) -> None:
    if path is None:
        out.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _cmd_index(cfg, out):
    index = imgio.index_dataset(cfg.dataset, cfg.layout)
    spectra = _spectra(index, cfg.spectrum)
    rows = [s for s in index.samples if s.spectrum in spectra]
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "subject", "spectrum", "sample_index"])
            for s in rows:
                w.writerow([Path(s.locator).relative_to(cfg.dataset).as_posix(), s.subject, s.spectrum, s.sample_index])
    for sp in spectra:
        out.write(f"{sp}: {index.subject_count} subjects x {index.samples_per_subject(sp)} samples\n")


def _cmd_synth(cfg, out):
    paths = imgio.write_synth_corpus(cfg.output, cfg.classes, cfg.samples, cfg.size, binary=not cfg.plain)
    out.write(f"wrote {len(paths)} images to {cfg.output}\n")


def _records(cfg):
    index = imgio.index_dataset(cfg.dataset, cfg.layout)
    return [r for sp in _spectra(index, cfg.spectrum) for r in index.select(sp)]


def _cmd_extract(cfg, out):
    records = _records(cfg)
    X, _, _ = evaluation.extract_features(records, cfg.descriptor, cfg.descriptor_config)
    text = descriptors.format_features([r.subject for r in records], [r.spectrum for r in records], X)
    _write(cfg.output, text, out)


def _cmd_fit(cfg, out):
    if cfg.features:
        subjects, _, X = descriptors.parse_features(Path(cfg.features).read_text())
    else:
        records = _records(cfg)
        X, _, _ = evaluation.extract_features(records, cfg.descriptor, cfg.descriptor_config)
        subjects = [r.subject for r in records]
    n_classes = len(set(subjects))
    pca = pca_fit(X, cfg.retention.with_cap(max(1, len(X) - n_classes - 1)))
    lda = lda_fit(pca.transform(X), subjects)
    target = Path(cfg.output)
    target.mkdir(parents=True, exist_ok=True)
    (target / "pca.txt").write_text(format_pca(pca))
    (target / "lda.txt").write_text(format_lda(lda))
    out.write(f"PCA {pca.input_dim}->{pca.retained_dim}, LDA {lda.input_dim}->{lda.output_dim}, {n_classes} classes\n")


def _cmd_evaluate(cfg, out):
    index = imgio.index_dataset(cfg.dataset, cfg.layout)
    names = DESCRIPTORS if cfg.descriptor == "all" else (cfg.descriptor,)
    protocol = evaluation.SplitProtocol.parse(cfg.protocol, cfg.seed)
    cache = evaluation.FeatureCache()
    rows = []
    for sp in _spectra(index, cfg.spectrum):
        for name in names:
            rows.append(
                evaluation.run_experiment(
                    index, sp, name, cfg.descriptor_config, protocol, cfg.retention,
                    cache=cache, timing=not cfg.no_timing,
                )
            )
    _write(cfg.output, evaluation.emit_report(rows), out)


_HANDLERS = {
    "index": _cmd_index,
    "synth": _cmd_synth,
    "extract": _cmd_extract,
    "fit": _cmd_fit,
    "evaluate": _cmd_evaluate,
}


def run(cfg: CliConfig, out=None) -> int:
    _HANDLERS[cfg.command](cfg, out or sys.stdout)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    err = err or sys.stderr
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return run(cfg, out)
    except (ValueError, OSError) as exc:
        err.write(f"texturekit {cfg.command}: {exc}\n")
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover
        err.write(f"texturekit {cfg.command}: internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""The ``regioncal`` command: generate data, train, calibrate, evaluate and compare.

Each step reads and writes files, so the pipeline can be run step by step::

    regioncal generate --classes 8 --images 64 --seed 1 -o train.rds.jsonl
    regioncal train --dataset train.rds.jsonl -o models.jsonl
    regioncal calibrate --dataset train.rds.jsonl --models models.jsonl -o jc.json
    regioncal eval --dataset test.rds.jsonl --models models.jsonl --calibration jc.json

Errors are written to standard error as a single JSON line with a ``kind`` field.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import numpy as np
from django.core.management.base import BaseCommand, CommandError, handle_default_options

from regioncal.calibration.io import load_calibration, save_calibration
from regioncal.calibration.joint import CalibrationResult, joint_calibrate
from regioncal.calibration.losses import evaluate_loss, label_dataset
from regioncal.calibration.platt import platt_calibrate
from regioncal.calibration.sigmoid import GridSpec
from regioncal.datasets import (
    SyntheticConfig,
    class_frequencies,
    class_pixel_counts,
    generate_synthetic,
    load_dataset,
    save_dataset,
    to_weak,
)
from regioncal.exceptions import (
    DimensionMismatch,
    InvalidParameterValue,
    OracleMismatch,
    OutputFailed,
    RegionCalException,
)
from regioncal.forest import label_image_naive
from regioncal.metrics import evaluate, evaluate_weak
from regioncal.output.reports import (
    render_comparison,
    render_frequencies,
    render_json,
    render_report_text,
)
from regioncal.parallel import resolve_jobs
from regioncal.svm import (
    MiningConfig,
    assemble_training_set_fs,
    load_models,
    save_models,
    score_all,
    train_all,
)
from regioncal.types import LossKind, Supervision
from regioncal.weak import alternate_train, init_latent, load_assignment

VERBOSITY_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}

CALIBRATION_METHODS = ("none", "platt", "jc")


def _positive_int(value):
    number = int(value)
    if number < 1:
        raise ValueError(value)
    return number


def _add_dataset_arguments(parser, required=True):
    parser.add_argument(
        "--dataset", required=required, type=Path, help="Dataset file (JSONL)."
    )
    parser.add_argument(
        "--features", type=Path, help="Sidecar file with the region features of the dataset."
    )


def _add_jobs_argument(parser):
    parser.add_argument(
        "--jobs",
        type=_positive_int,
        help="Number of workers (default: $REGIONCAL_JOBS, or the number of cores).",
    )


def _add_output_argument(parser, required=True):
    parser.add_argument("-o", "--output", type=Path, required=required, help="Output file.")


def _add_grid_arguments(parser):
    defaults = GridSpec()
    group = parser.add_argument_group("calibration grid")
    group.add_argument("--a-min", type=float, default=defaults.a_range[0])
    group.add_argument("--a-max", type=float, default=defaults.a_range[1])
    group.add_argument("--b-min", type=float, default=defaults.b_range[0])
    group.add_argument("--b-max", type=float, default=defaults.b_range[1])
    group.add_argument(
        "--grid-points",
        type=int,
        default=defaults.points,
        help="Number of values per line search (default: %(default)s).",
    )
    group.add_argument("--init-a", type=float, default=defaults.init_a)
    group.add_argument("--init-b", type=float, default=defaults.init_b)
    group.add_argument(
        "--assignment",
        type=Path,
        help="Latent assignment snapshot for Platt scaling on weakly supervised data.",
    )
    group.add_argument(
        "--iou-threshold",
        type=float,
        help="Overlap above which region proposals are positives (Platt scaling, full data).",
    )


def _add_format_argument(parser):
    parser.add_argument(
        "--format", choices=("json", "text"), default="json", help="Report format."
    )


class Command(BaseCommand):
    help = "Region-based semantic segmentation with jointly calibrated classifiers."
    requires_system_checks = []

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", metavar="subcommand")
        subparsers.required = True

        generate = subparsers.add_parser("generate", help="Generate a synthetic dataset.")
        defaults = SyntheticConfig()
        generate.add_argument("--classes", type=int, default=defaults.class_count)
        generate.add_argument("--images", type=int, default=defaults.images)
        generate.add_argument("--superpixels", type=int, default=defaults.superpixels_per_image)
        generate.add_argument(
            "--hierarchies",
            type=int,
            default=defaults.hierarchy_count,
            help="Number of region trees per image (default: %(default)s).",
        )
        generate.add_argument(
            "--imbalance",
            type=float,
            default=defaults.imbalance_exponent,
            help="Power law exponent of the class frequencies (default: %(default)s).",
        )
        generate.add_argument("--feature-dim", type=int, default=defaults.feature_dim)
        generate.add_argument("--separation", type=float, default=defaults.cluster_separation)
        generate.add_argument("--noise", type=float, default=defaults.noise_sigma)
        generate.add_argument(
            "--run-length",
            type=float,
            default=defaults.run_length,
            help="Mean object length in superpixels (default: %(default)s).",
        )
        generate.add_argument(
            "--absent-fraction",
            type=float,
            default=defaults.absent_fraction,
            help="Share of the images each class is kept out of (default: %(default)s).",
        )
        generate.add_argument("--min-pixels", type=int, default=defaults.min_pixels)
        generate.add_argument("--max-pixels", type=int, default=defaults.max_pixels)
        generate.add_argument(
            "--weak", action="store_true", help="Only write the image-level labels."
        )
        generate.add_argument("--seed", type=int, default=defaults.seed)
        _add_output_argument(generate)

        train = subparsers.add_parser("train", help="Train the one-vs-all classifiers.")
        _add_dataset_arguments(train)
        train.add_argument(
            "--supervision",
            choices=[str(s) for s in Supervision],
            help="Train as fully or weakly supervised (default: that of the dataset).",
        )
        train.add_argument("--reg-strength", type=float)
        train.add_argument("--mining-batch-size", type=_positive_int)
        train.add_argument("--mining-threshold", type=float)
        train.add_argument("--mining-max-rounds", type=_positive_int)
        train.add_argument(
            "--no-mining", action="store_true", help="Train on all negatives at once."
        )
        train.add_argument("--iou-threshold", type=float)
        train.add_argument(
            "--rounds", type=_positive_int, help="Alternation rounds (weak supervision)."
        )
        train.add_argument(
            "--snapshots", type=Path, help="Directory for the assignment of every round."
        )
        _add_jobs_argument(train)
        _add_output_argument(train)

        calibrate = subparsers.add_parser("calibrate", help="Calibrate the classifier scores.")
        _add_dataset_arguments(calibrate)
        calibrate.add_argument("--models", type=Path, required=True)
        calibrate.add_argument("--method", choices=CALIBRATION_METHODS, default="jc")
        calibrate.add_argument(
            "--loss",
            choices=[str(kind) for kind in LossKind],
            help="Loss of the joint calibration (default: that of the dataset supervision).",
        )
        _add_grid_arguments(calibrate)
        _add_jobs_argument(calibrate)
        _add_output_argument(calibrate)

        evaluate_parser = subparsers.add_parser("eval", help="Label a dataset and evaluate.")
        _add_dataset_arguments(evaluate_parser)
        evaluate_parser.add_argument("--models", type=Path, required=True)
        evaluate_parser.add_argument(
            "--calibration",
            type=Path,
            help="Calibration file (default: the initial parameters a=-7, b=0).",
        )
        evaluate_parser.add_argument(
            "--oracle-check",
            action="store_true",
            help="Also label every image by brute force, and check the labelings are equal.",
        )
        _add_format_argument(evaluate_parser)
        _add_jobs_argument(evaluate_parser)
        _add_output_argument(evaluate_parser, required=False)

        compare = subparsers.add_parser(
            "compare", help="Evaluate no calibration, Platt scaling and joint calibration."
        )
        _add_dataset_arguments(compare)
        compare.add_argument("--models", type=Path, required=True)
        compare.add_argument(
            "--eval-dataset", type=Path, help="Held-out dataset (default: the training dataset)."
        )
        compare.add_argument("--eval-features", type=Path)
        _add_grid_arguments(compare)
        _add_format_argument(compare)
        _add_jobs_argument(compare)
        _add_output_argument(compare, required=False)

    def run_from_argv(self, argv):
        """Run from the command line, reporting errors as a JSON line on stderr."""
        try:
            parser = self.create_parser(argv[0], argv[1])
            options = parser.parse_args(argv[2:])
            cmd_options = vars(options)
            args = cmd_options.pop("args", ())
            handle_default_options(options)
            self.execute(*args, **cmd_options)
        except RegionCalException as e:
            self._exit_with_error(e, argv)
        except CommandError as e:
            self._exit_with_error(InvalidParameterValue("arguments", str(e)), argv)
        except OSError as e:
            self._exit_with_error(OutputFailed(e.filename or "output", str(e)), argv)

    def _exit_with_error(self, exception: RegionCalException, argv):
        if "--traceback" in argv:
            raise exception
        sys.stderr.write(exception.as_json().decode() + "\n")
        sys.exit(exception.exit_code)

    def handle(self, *args, subcommand, **options):
        logging.getLogger("regioncal").setLevel(
            VERBOSITY_LEVELS.get(options["verbosity"], logging.DEBUG)
        )
        getattr(self, f"handle_{subcommand}")(**options)

    def handle_generate(self, **options):
        config = SyntheticConfig(
            class_count=options["classes"],
            images=options["images"],
            superpixels_per_image=options["superpixels"],
            hierarchy_count=options["hierarchies"],
            imbalance_exponent=options["imbalance"],
            feature_dim=options["feature_dim"],
            cluster_separation=options["separation"],
            noise_sigma=options["noise"],
            run_length=options["run_length"],
            absent_fraction=options["absent_fraction"],
            min_pixels=options["min_pixels"],
            max_pixels=options["max_pixels"],
            seed=options["seed"],
        )
        dataset = generate_synthetic(config)
        pixels = list(class_pixel_counts(dataset).values())
        if options["weak"]:
            dataset = to_weak(dataset)

        save_dataset(dataset, options["output"])
        self.stdout.write(
            f"Wrote {len(dataset)} images ({dataset.supervision} supervision)"
            f" to {options['output']}"
        )
        self.stdout.write(
            render_frequencies(
                pixels, class_frequencies(config.class_count, config.imbalance_exponent)
            ),
            ending="",
        )

    def handle_train(self, **options):
        dataset = load_dataset(options["dataset"], options["features"])
        jobs = resolve_jobs(options["jobs"])
        supervision = (
            Supervision.from_string(options["supervision"], "supervision")
            if options["supervision"]
            else dataset.supervision
        )
        mining = MiningConfig.from_settings(
            batch_size=options["mining_batch_size"],
            threshold=options["mining_threshold"],
            max_rounds=options["mining_max_rounds"],
            enabled=False if options["no_mining"] else None,
        )

        if supervision is Supervision.FULL:
            dataset.require_full_supervision("train --supervision full")
            for flag in ("rounds", "snapshots"):
                if options[flag] is not None:
                    raise InvalidParameterValue(
                        flag, f"--{flag} is only used for weakly supervised training."
                    )
            training_set = assemble_training_set_fs(dataset, options["iou_threshold"])
            models = train_all(dataset, training_set, options["reg_strength"], mining, jobs)
        else:
            if options["iou_threshold"] is not None:
                raise InvalidParameterValue(
                    "iou_threshold", "--iou-threshold is only used for fully supervised training."
                )
            if dataset.is_fully_supervised:
                dataset = to_weak(dataset)
            result = alternate_train(
                dataset,
                rounds=options["rounds"],
                reg=options["reg_strength"],
                mining=mining,
                jobs=jobs,
                snapshot_dir=options["snapshots"],
            )
            models = result.models
            self.stdout.write(
                f"Alternation stopped after {len(result.history)} rounds"
                f" ({'converged' if result.converged else 'not converged'})"
            )

        for model in models:
            if not model.trainable:
                self.stderr.write(
                    f"Class {model.class_id} is untrainable, it will never be predicted.",
                    style_func=self.style.WARNING,
                )
        save_models(models, options["output"])
        self.stdout.write(f"Wrote {len(models)} models to {options['output']}")

    def handle_calibrate(self, **options):
        dataset = load_dataset(options["dataset"], options["features"])
        jobs = resolve_jobs(options["jobs"])
        scores = score_all(load_models(options["models"]), dataset, jobs=jobs)
        grid = self._grid_spec(options)
        kind = (
            LossKind.from_string(options["loss"], "loss")
            if options["loss"]
            else LossKind.for_supervision(dataset.supervision)
        )

        result = self._calibrate(options["method"], dataset, scores, grid, kind, options, jobs)
        save_calibration(result, options["output"])
        self.stdout.write(
            f"Wrote {result.method} calibration of {dataset.class_count} classes"
            f" to {options['output']}"
        )

    def _grid_spec(self, options) -> GridSpec:
        grid = GridSpec(
            a_range=(options["a_min"], options["a_max"]),
            b_range=(options["b_min"], options["b_max"]),
            points=options["grid_points"],
            init_a=options["init_a"],
            init_b=options["init_b"],
        )
        grid.validate()
        return grid

    def _calibrate(self, method, dataset, scores, grid, kind, options, jobs):
        if method == "jc":
            return joint_calibrate(dataset, scores, kind=kind, grid=grid, jobs=jobs)
        elif method == "platt":
            return platt_calibrate(dataset, scores, self._platt_samples(dataset, options), grid)
        else:
            params = grid.initial_params(dataset.class_count)
            loss = evaluate_loss(dataset, scores, params, kind, jobs=jobs)
            return CalibrationResult(
                params=params, method="none", loss_kind=kind, initial_loss=loss, final_loss=loss
            )

    def _platt_samples(self, dataset, options):
        if dataset.is_fully_supervised:
            if options["assignment"] is not None:
                raise InvalidParameterValue(
                    "assignment", "--assignment is only used for weakly supervised data."
                )
            return assemble_training_set_fs(dataset, options["iou_threshold"])

        if options["assignment"] is not None:
            assignment = load_assignment(options["assignment"])
            assignment.check(dataset)
        else:
            assignment = init_latent(dataset)
        return assignment.training_set()

    def handle_eval(self, **options):
        dataset = load_dataset(options["dataset"], options["features"])
        jobs = resolve_jobs(options["jobs"])
        scores = score_all(load_models(options["models"]), dataset, jobs=jobs)
        if options["calibration"] is not None:
            params = load_calibration(options["calibration"]).params
        else:
            params = GridSpec().initial_params(dataset.class_count)
        if params.class_count != dataset.class_count:
            raise DimensionMismatch(
                "calibration",
                f"The calibration has {params.class_count} classes,"
                f" the dataset has {dataset.class_count}.",
            )

        labelings = label_dataset(dataset, scores, params, jobs=jobs)
        if options["oracle_check"]:
            for image, image_scores, labels in zip(dataset.images, scores, labelings):
                expected = label_image_naive(image.forest, image_scores, params)
                if not np.array_equal(labels, expected):
                    raise OracleMismatch(f"image {image.id}")
            self.stderr.write(
                f"Oracle check passed for {len(dataset)} images",
                style_func=self.style.SUCCESS,
            )

        report = self._evaluate(labelings, dataset)
        if options["format"] == "json":
            self._write_report(render_json(report.as_dict()), options["output"])
        else:
            self._write_report(render_report_text(report.as_dict()).encode(), options["output"])

    def _evaluate(self, labelings, dataset):
        if dataset.is_fully_supervised:
            return evaluate(labelings, dataset)
        else:
            return evaluate_weak(labelings, dataset)

    def handle_compare(self, **options):
        dataset = load_dataset(options["dataset"], options["features"])
        if options["eval_dataset"] is not None:
            eval_dataset = load_dataset(options["eval_dataset"], options["eval_features"])
            if eval_dataset.class_count != dataset.class_count:
                raise DimensionMismatch(
                    "eval_dataset",
                    f"The evaluation dataset has {eval_dataset.class_count} classes,"
                    f" the training dataset has {dataset.class_count}.",
                )
        elif options["eval_features"] is not None:
            raise InvalidParameterValue(
                "eval_features", "--eval-features needs an --eval-dataset."
            )
        else:
            eval_dataset = dataset

        jobs = resolve_jobs(options["jobs"])
        models = load_models(options["models"])
        scores = score_all(models, dataset, jobs=jobs)
        eval_scores = scores if eval_dataset is dataset else score_all(models, eval_dataset, jobs)
        grid = self._grid_spec(options)
        kind = LossKind.for_supervision(dataset.supervision)

        reports = []
        for method in CALIBRATION_METHODS:
            result = self._calibrate(method, dataset, scores, grid, kind, options, jobs)
            labelings = label_dataset(eval_dataset, eval_scores, result.params, jobs=jobs)
            reports.append((method, self._evaluate(labelings, eval_dataset)))

        report_kind = "full" if eval_dataset.is_fully_supervised else "weak"
        if options["format"] == "json":
            data = {
                "kind": report_kind,
                "methods": [
                    {"method": method, "report": report.as_dict()} for method, report in reports
                ],
            }
            self._write_report(render_json(data), options["output"])
        else:
            rows = [(method, *_comparison_row(report)) for method, report in reports]
            self._write_report(
                render_comparison(rows, report_kind).encode(), options["output"]
            )

    def _write_report(self, content: bytes, path=None):
        if path is None:
            self.stdout.write(content.decode(), ending="")
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(content)


def _comparison_row(report) -> tuple:
    if hasattr(report, "class_average_accuracy"):
        return report.class_average_accuracy, report.global_accuracy

    def _mean(values):
        defined = [value for value in values if value is not None]
        return sum(defined) / len(defined) if defined else None

    return report.hamming_loss, _mean(report.precision), _mean(report.recall)


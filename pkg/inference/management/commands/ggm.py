from pathlib import Path

import pandas as pd
from django.core.management.base import BaseCommand, CommandError

from inference.conf import inference_settings
from inference.enums.enums import CenterModeEnum, ExportFormatEnum, ModelKindEnum
from inference.enums.orientation_enum import OrientationEnum
from inference.exceptions import GgmError, InvalidParameterError, ObservationFormatError
from inference.services.evaluation import EdgeScoreMatrix, load_gold, roc_auc
from inference.services.export import export_graph, export_roc
from inference.services.ggim import compute_bound
from inference.services.lasso import LassoOptions
from inference.services.linalg import sample_diffusion
from inference.services.observations import (
    ObservationSet,
    center,
    load_csv,
    sample_covariance,
    split_by_condition,
)
from inference.tasks import (
    edge_count,
    fit_model,
    fit_model_path,
    parse_rho_path,
    rho_for_edge_count,
    run_hybrid,
)

MODEL_COMMANDS = [kind.value for kind in ModelKindEnum]


class Command(BaseCommand):
    help = "Learn directed Gaussian graphical models from observation CSV files"

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True)

        for name in MODEL_COMMANDS:
            sub = subparsers.add_parser(name, help=f"fit a {name} model to one data set")
            self._data_arguments(sub)
            self._lasso_arguments(sub)
            self._output_arguments(sub)
            sub.add_argument("--rho-path", help="a:b:n (linear) or a:b:nlog (log-spaced)")
            sub.add_argument(
                "--target-edges", type=int, help="search rho for this many directed edges"
            )
            if name == ModelKindEnum.GGIM_BOUNDED.value:
                sub.add_argument("--delta", type=float, help="diagonal lift margin")

        hybrid = subparsers.add_parser("hybrid", help="GGIM + GGCEM edge scores over conditions")
        self._data_arguments(hybrid)
        self._lasso_arguments(hybrid)
        self._output_arguments(hybrid)
        hybrid.add_argument("--gold", help="from,to CSV; the AUC is reported on stderr")
        hybrid.add_argument("--n-jobs", type=int, default=None)

        roc = subparsers.add_parser("roc", help="ROC points and AUC of an edge score list")
        roc.add_argument("scores", help="edge list CSV with source,target,weight")
        roc.add_argument("--gold", required=True)
        roc.add_argument("--data", help="observation CSV fixing the variable set")
        roc.add_argument(
            "--orientation",
            choices=[orientation.value for orientation in OrientationEnum],
            default=OrientationEnum.SENDING.value,
            help="orientation the score file was exported in",
        )
        roc.add_argument("--format", choices=["csv", "json"], default="csv")
        roc.add_argument("--output")

        simulate = subparsers.add_parser("simulate", help="draw observations from a diffusion")
        simulate.add_argument("laplacian", help="square CSV with a header row of names")
        simulate.add_argument("--n", type=int, default=1000)
        simulate.add_argument("--seed", type=int, default=None)
        simulate.add_argument("--dt", type=float, default=None)
        simulate.add_argument("--sigma", type=float, default=None)
        simulate.add_argument("--burn-in", type=int, default=None, help="steps")
        simulate.add_argument("--condition", help="label written to a condition column")
        simulate.add_argument("--output")

    def _data_arguments(self, parser):
        parser.add_argument("data", help="observation CSV")
        parser.add_argument(
            "--center",
            choices=[mode.value for mode in CenterModeEnum],
            default=inference_settings.DEFAULT_CENTER,
        )
        parser.add_argument("--condition", help="only use rows with this condition label")

    def _lasso_arguments(self, parser):
        parser.add_argument("--rho", type=float, default=1e-3)
        parser.add_argument("--tol", type=float, default=None)
        parser.add_argument("--max-sweeps", type=int, default=None)

    def _output_arguments(self, parser):
        parser.add_argument(
            "--orientation",
            choices=[orientation.value for orientation in OrientationEnum],
            default=inference_settings.DEFAULT_ORIENTATION,
        )
        parser.add_argument("--edge-tol", type=float, default=None)
        parser.add_argument(
            "--format", choices=[fmt.value for fmt in ExportFormatEnum], default="csv"
        )
        parser.add_argument("--output")

    def handle(self, *args, **options):
        subcommand = options["subcommand"]
        try:
            if subcommand in MODEL_COMMANDS:
                text = self.fit(ModelKindEnum(subcommand), options)
            elif subcommand == "hybrid":
                text = self.hybrid(options)
            elif subcommand == "roc":
                text = self.roc(options)
            else:
                text = self.simulate(options)
        except GgmError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        if options.get("output") is None:
            self.stdout.write(text, ending="")

    def lasso_options(self, options):
        values = {}
        if options["tol"] is not None:
            values["tolerance"] = options["tol"]
        if options["max_sweeps"] is not None:
            values["max_sweeps"] = options["max_sweeps"]
        return LassoOptions(**values)

    def observations(self, options):
        observations = load_csv(options["data"])
        observations = center(observations, options["center"], by_condition=True)
        label = options.get("condition")
        if label is None:
            return observations
        for group_label, group in split_by_condition(observations):
            if group_label == label:
                return group
        raise InvalidParameterError(f"no rows with condition {label!r}")

    def fit(self, kind, options):
        observations = self.observations(options)
        covariance = sample_covariance(observations)
        lasso_options = self.lasso_options(options)
        delta = options.get("delta")

        if options["rho_path"]:
            estimates = fit_model_path(
                kind, covariance, parse_rho_path(options["rho_path"]), lasso_options, delta
            )
            return self.path_table(estimates, options)

        if options["target_edges"] is not None:
            search = rho_for_edge_count(
                kind,
                covariance,
                options["target_edges"],
                lasso_options,
                delta,
                options["edge_tol"],
            )
            self.stderr.write(f"rho={search.rho:.12g} edges={search.edge_count}")
            estimate = search.estimate
        else:
            estimate = fit_model(kind, covariance, options["rho"], lasso_options, delta)

        if kind is ModelKindEnum.GGIM_BOUNDED and estimate.alpha is not None and estimate.recovered:
            bound = compute_bound(estimate, covariance)
            self.stderr.write(
                f"xi={bound.xi:.6g} alpha={bound.alpha:.6g} "
                f"|Sigma_hat - S|_inf={bound.lhs:.6g} <= {bound.bound:.6g}: {bound.holds}"
            )
        return export_graph(
            estimate,
            options["format"],
            options["orientation"],
            options["output"],
            options["edge_tol"],
            names=observations.names,
        )

    def path_table(self, estimates, options):
        rows = []
        for estimate in estimates:
            residual = estimate.xi if hasattr(estimate, "xi") else estimate.residual
            rows.append(
                {
                    "rho": estimate.rho,
                    "edges": edge_count(estimate, options["edge_tol"]),
                    "residual": residual,
                    "converged": estimate.converged,
                }
            )
        frame = pd.DataFrame(rows, columns=["rho", "edges", "residual", "converged"])
        if options["format"] == ExportFormatEnum.JSON.value:
            text = frame.to_json(orient="records", double_precision=12) + "\n"
        else:
            text = frame.to_csv(
                index=False,
                float_format=f"%.{inference_settings.OUTPUT_PRECISION}g",
                lineterminator="\n",
            )
        if options["output"]:
            Path(options["output"]).write_text(text, encoding="utf-8")
        return text

    def hybrid(self, options):
        observations = load_csv(options["data"])
        run = run_hybrid(
            observations,
            options["rho"],
            options["center"],
            options["orientation"],
            self.lasso_options(options),
            options["n_jobs"],
            options.get("condition"),
        )
        for fit in run.fits:
            if fit.ggcem is None:
                self.stderr.write(f"condition {fit.label}: GGCEM skipped (singular S)")
        if options["gold"]:
            result = roc_auc(run.scores, load_gold(options["gold"], observations.names))
            self.stderr.write(f"AUC={result.auc:.12g}")
        return export_graph(
            run.scores,
            options["format"],
            options["orientation"],
            options["output"],
            options["edge_tol"],
        )

    def roc(self, options):
        try:
            frame = pd.read_csv(options["scores"], dtype={"source": str, "target": str})
        except (pd.errors.EmptyDataError, pd.errors.ParserError, ValueError) as exc:
            raise ObservationFormatError(f"{options['scores']}: {exc}") from exc
        if not {"source", "target", "weight"} <= set(frame.columns):
            raise ObservationFormatError("score file needs source,target,weight columns")
        if options["data"]:
            names = list(load_csv(options["data"]).names)
        else:
            gold_frame = pd.read_csv(options["gold"], dtype=str)
            labels = pd.concat(
                [frame["source"], frame["target"], gold_frame.iloc[:, 0], gold_frame.iloc[:, 1]]
            )
            names = list(dict.fromkeys(labels.str.strip()))
        index = {name: position for position, name in enumerate(names)}
        scores = pd.DataFrame(0.0, index=names, columns=names)
        for source, target, weight in frame[["source", "target", "weight"]].itertuples(index=False):
            if source not in index or target not in index:
                raise ObservationFormatError(f"unknown variable in score {source} -> {target}")
            if source != target:
                scores.loc[source, target] = abs(float(weight))
        matrix = EdgeScoreMatrix(scores.to_numpy(), options["orientation"], tuple(names))
        result = roc_auc(matrix, load_gold(options["gold"], names))
        self.stderr.write(f"AUC={result.auc:.12g}")
        return export_roc(result, options["format"], options["output"])

    def simulate(self, options):
        try:
            frame = pd.read_csv(options["laplacian"])
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
            raise ObservationFormatError(f"{options['laplacian']}: {exc}") from exc
        if frame.shape[0] != frame.shape[1]:
            raise ObservationFormatError(f"Laplacian must be square, got {frame.shape}")
        try:
            laplacian = frame.to_numpy(dtype=float)
        except ValueError as exc:
            raise ObservationFormatError(f"{options['laplacian']}: {exc}") from exc
        draws = sample_diffusion(
            laplacian,
            sigma=options["sigma"],
            dt=options["dt"],
            burn_in_steps=options["burn_in"],
            seed=options["seed"],
            n_chains=options["n"],
        )
        conditions = None
        if options["condition"]:
            conditions = [options["condition"]] * draws.shape[0]
        observations = ObservationSet(tuple(frame.columns), draws, conditions=conditions)
        text = observations.to_frame().to_csv(
            index=False,
            float_format=f"%.{inference_settings.OUTPUT_PRECISION}g",
            lineterminator="\n",
        )
        if options["output"]:
            Path(options["output"]).write_text(text, encoding="utf-8")
        return text

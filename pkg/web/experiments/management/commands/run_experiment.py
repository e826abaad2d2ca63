from django.core.management.base import BaseCommand, CommandError

from echo_lab.exceptions import EchoLabError
from experiments.config import load_config, parse_sweep
from experiments.pipeline import run_experiment, sweep


class Command(BaseCommand):
    help = "Run an experiment config and write its CSV/JSON artifacts"

    def add_arguments(self, parser):
        parser.add_argument(
            "--config",
            required=True,
            help="Experiment TOML file, or the name of a bundled config",
        )
        parser.add_argument(
            "--seed", type=int, help="Root seed; overrides run.seed of the config"
        )
        parser.add_argument("--out", help="Artifact directory")
        parser.add_argument(
            "--sweep",
            metavar="KEY=START:STOP:N",
            help="Repeat the run over N evenly spaced values of a numeric key",
        )
        parser.add_argument(
            "--quiet", action="store_true", help="Do not print the summary line"
        )

    def handle(self, *args, **options):
        try:
            config = load_config(options["config"])
            if options["seed"] is not None:
                config = config.with_seed(options["seed"])
            if options["sweep"]:
                variable, grid = parse_sweep(options["sweep"])
                _, directory = sweep(config, variable, grid, options["out"])
                message = (
                    f"{config.experiment}: swept {variable} over {grid.size} points"
                )
            else:
                result, directory = run_experiment(config, options["out"])
                message = result.summary_line
        except EchoLabError as e:
            raise CommandError(e.one_line()) from e

        if not options["quiet"]:
            self.stdout.write(self.style.SUCCESS(message))
            self.stdout.write(f"Artifacts in {directory}")

from django.core.management.base import BaseCommand, CommandError

from echo_lab.exceptions import EchoLabError
from experiments.artifacts import verify_manifest


class Command(BaseCommand):
    help = "Check the files of an artifact directory against its manifest"

    def add_arguments(self, parser):
        parser.add_argument("directory", help="Directory holding manifest.json")

    def handle(self, *args, **options):
        try:
            checked = verify_manifest(options["directory"])
        except EchoLabError as e:
            raise CommandError(e.one_line()) from e
        self.stdout.write(self.style.SUCCESS(f"{checked} files match the manifest"))

#!/usr/bin/env python
"""Command-line entry point of echo_lab: run_experiment, verify_manifest, test."""
import os
import sys


def main():
    # The test runner always gets the quiet single-threaded settings
    if "test" in sys.argv:
        os.environ["DJANGO_SETTINGS_MODULE"] = "echo_lab.test_settings"
    else:
        os.environ.setdefault("DJANGO_SETTINGS_MODULE", "echo_lab.settings")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the project requirements first."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()

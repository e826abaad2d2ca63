"""
Root of the echo_lab error hierarchy.

Every error raised on purpose by an app derives from EchoLabError and carries a
stable ``code`` so the command line can print a single machine-parseable line.
"""


class EchoLabError(Exception):
    code = "ECHO_LAB_ERROR"

    def one_line(self) -> str:
        detail = " ".join(str(self).split())
        return f"{self.code} {detail}".strip()

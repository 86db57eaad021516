"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to the
documented codes (1 config/usage, 2 data, 3 backend) without a lookup table.
"""

from __future__ import annotations


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError):
    exit_code = 1


class DataError(PipelineError):
    exit_code = 2


class BackendError(PipelineError):
    exit_code = 3


# ingest


class IoError(DataError):
    def __init__(self, path, reason: str = ""):
        self.path = str(path)
        super().__init__(f"cannot read {self.path}" + (f": {reason}" if reason else ""))


class MalformedLine(DataError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class RejectRateExceeded(DataError):
    def __init__(self, rejected: int, total: int, ceiling: float):
        self.rejected = rejected
        self.total = total
        self.ceiling = ceiling
        super().__init__(
            f"{rejected}/{total} lines rejected, above the {ceiling:.4%} ceiling"
        )


class EmptyDataset(DataError):
    pass


class SamplingExhausted(DataError):
    def __init__(self, fractions_seen: list[float]):
        self.fractions_seen = list(fractions_seen)
        lo = min(fractions_seen) if fractions_seen else float("nan")
        hi = max(fractions_seen) if fractions_seen else float("nan")
        super().__init__(
            f"no qualifying slice after {len(fractions_seen)} draws "
            f"(anomaly fractions seen in [{lo:.4f}, {hi:.4f}])"
        )


# drain


class EmptyMessage(DataError):
    pass


# sequencer


class InvalidWindowSize(ConfigError):
    pass


class MissingParse(DataError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"no parsed record for line {line_no}")


# prompts


class InvalidInjection(ConfigError):
    pass


# llm


class CassetteMiss(BackendError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"cassette has no entry for {digest}")


class MissingResponses(BackendError):
    """Raised when a run cannot finish because replay lacks some digests."""

    def __init__(self, digests: list[str]):
        self.digests = list(digests)
        listing = "\n".join(f"  {d}" for d in self.digests)
        super().__init__(f"{len(self.digests)} request(s) missing from cassette:\n{listing}")


class BackendUnavailable(BackendError):
    pass


class RateLimited(BackendError):
    pass


class ServerError(BackendError):
    def __init__(self, status: int):
        self.status = status
        super().__init__(f"server error {status} persisted after retries")


class ProtocolError(BackendError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"unexpected HTTP status {status}" + (f": {detail}" if detail else ""))


# responses


class UnrecognizedFlag(ValueError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"cannot interpret {value!r} as an anomaly flag")


class UnparsableResponse(Exception):
    def __init__(self, raw_text: str, reformatted_text: str):
        self.raw_text = raw_text
        self.reformatted_text = reformatted_text
        super().__init__("response could not be parsed even after reformatting")

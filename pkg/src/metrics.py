"""Dataclasses for synthesis call metrics."""

from dataclasses import dataclass


@dataclass
class SynthesisMetrics:
    """Metrics for a single backend call."""

    scene_ref: str
    latency_ms: float
    image_bytes: int
    backend_id: str = "unknown"

    @classmethod
    def from_result(cls, result) -> "SynthesisMetrics":
        """Create metrics from a SynthesisResult."""
        return cls(
            scene_ref=result.scene_ref,
            latency_ms=result.elapsed_ms,
            image_bytes=len(result.image),
            backend_id=result.backend_id,
        )


@dataclass
class BatchMetrics:
    """Aggregated metrics for a synthesis batch."""

    total_requests: int = 0
    skipped: int = 0
    api_calls: int = 0
    total_image_bytes: int = 0
    avg_latency_ms: float = 0.0
    max_latency_ms: float = 0.0
    errors: int = 0

    @property
    def success_rate(self) -> float:
        """Share of attempted requests that produced an image."""
        attempted = self.api_calls + self.errors
        if attempted == 0:
            return 0.0
        return self.api_calls / attempted

    def add_api_call(self, metrics: SynthesisMetrics) -> None:
        """Add a successful call's metrics to the batch."""
        self.api_calls += 1
        self.total_image_bytes += metrics.image_bytes
        self.max_latency_ms = max(self.max_latency_ms, metrics.latency_ms)

        # Update running average for latency
        prev_total = (self.api_calls - 1) * self.avg_latency_ms
        self.avg_latency_ms = (prev_total + metrics.latency_ms) / self.api_calls

    def add_skip(self) -> None:
        """Record a request skipped because its output already exists."""
        self.skipped += 1

    def add_error(self) -> None:
        """Record a failed request."""
        self.errors += 1

    def summary(self) -> dict:
        """Get summary dict of metrics."""
        return {
            "total_requests": self.total_requests,
            "api_calls": self.api_calls,
            "skipped": self.skipped,
            "errors": self.errors,
            "success_rate": f"{self.success_rate:.1%}",
            "total_image_bytes": self.total_image_bytes,
            "avg_latency_ms": f"{self.avg_latency_ms:.0f}ms",
            "max_latency_ms": f"{self.max_latency_ms:.0f}ms",
        }

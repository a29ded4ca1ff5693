from dataclasses import dataclass, field, asdict, fields, replace
from typing import List, Dict, Any, Optional
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from xproject.errors import UsageError
from xproject.translator.mocks import FaultProfile
from xproject.utils.masking import mask_sensitive


# --------------------
# ENV HELPERS
# --------------------
def env_bool(key: str, default: bool) -> bool:
    return os.getenv(key, str(default)).lower() in ("1", "true", "yes", "on")


def env_int(key: str, default: int) -> int:
    return int(os.getenv(key, default))


def env_float(key: str, default: float) -> float:
    return float(os.getenv(key, default))


def env_str(key: str, default: str) -> str:
    return os.getenv(key, default)


BACKENDS = ("remote", "identity", "reverse", "pseudo", "fault")
MOCK_BACKENDS = ("identity", "reverse", "pseudo")
ALLOCATOR_MODES = ("global", "per_example")


# --------------------
# TELEMETRY
# --------------------
@dataclass
class TelemetryConfig:
    """
    Observability settings for a run.
    Env vars override defaults automatically; nothing is exported unless a
    signal is switched on.
    """

    service_name: str = field(
        default_factory=lambda: env_str("OTEL_SERVICE_NAME", "xproject")
    )

    resource_attributes: Dict[str, str] = field(default_factory=dict)

    # empty endpoint = console exporters on stderr
    collector_endpoint: str = field(
        default_factory=lambda: env_str("OTEL_EXPORTER_OTLP_ENDPOINT", "")
    )

    protocol: str = field(
        default_factory=lambda: env_str("OTEL_EXPORTER_OTLP_PROTOCOL", "http/protobuf")
    )

    headers: Dict[str, str] = field(default_factory=dict)

    enable_traces: bool = field(
        default_factory=lambda: env_bool("XPROJECT_ENABLE_TRACES", False)
    )

    enable_metrics: bool = field(
        default_factory=lambda: env_bool("XPROJECT_ENABLE_METRICS", False)
    )

    enable_logs: bool = field(
        default_factory=lambda: env_bool("XPROJECT_ENABLE_LOGS", False)
    )

    # instruments `requests` when the remote backend is in use
    auto_instrument: bool = field(
        default_factory=lambda: env_bool("XPROJECT_AUTO_INSTRUMENT", True)
    )

    export_interval_ms: int = field(
        default_factory=lambda: env_int("EXPORT_INTERVAL_MS", 5000)
    )

    max_queue_size: int = field(
        default_factory=lambda: env_int("MAX_QUEUE_SIZE", 2048)
    )

    max_export_batch_size: int = field(
        default_factory=lambda: env_int("MAX_EXPORT_BATCH_SIZE", 512)
    )

    sensitive_fields: List[str] = field(
        default_factory=lambda: ["password", "api_key", "token", "secret", "authorization"]
    )

    @property
    def any_enabled(self) -> bool:
        return self.enable_traces or self.enable_metrics or self.enable_logs

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# --------------------
# RUN
# --------------------
@dataclass
class RunConfig:
    """
    Everything a subcommand needs to build its backend and drive a batch.

    Precedence: defaults < environment < config file < command-line flags.
    """

    # BACKEND
    backend: str = "identity"

    mt_url: str = field(default_factory=lambda: env_str("XPROJECT_MT_URL", ""))

    mt_token: str = field(default_factory=lambda: env_str("XPROJECT_MT_TOKEN", ""))

    mt_timeout: float = field(
        default_factory=lambda: env_float("XPROJECT_MT_TIMEOUT", 30.0)
    )

    retries: int = 3
    backoff: float = 0.5

    # base mock wrapped by the fault backend
    fault_base: str = "identity"
    fault: FaultProfile = field(default_factory=FaultProfile)

    cache_path: Optional[str] = None

    # LANGUAGES
    src: str = "fr"
    tgt: str = "wo"
    tgt_locale: Optional[str] = None

    # EXECUTION
    parallel: int = field(default_factory=lambda: env_int("XPROJECT_PARALLEL", 1))
    seed: int = 0
    allocator: str = "global"
    max_quarantine_rate: float = 1.0

    marker_schemes: List[Dict[str, str]] = field(default_factory=list)

    telemetry: TelemetryConfig = field(default_factory=TelemetryConfig)

    # ------------------------------------------------------------------
    def validate(self) -> "RunConfig":
        if self.backend not in BACKENDS:
            raise UsageError(
                f"unknown backend '{self.backend}' (choose one of {', '.join(BACKENDS)})"
            )
        if self.fault_base not in MOCK_BACKENDS:
            raise UsageError(
                f"fault backend can only wrap a mock ({', '.join(MOCK_BACKENDS)}), "
                f"got '{self.fault_base}'"
            )
        if self.backend == "remote" and not self.mt_url:
            raise UsageError("remote backend needs XPROJECT_MT_URL or --mt-url")
        if self.parallel < 1:
            raise UsageError(f"parallelism must be >= 1, got {self.parallel}")
        if self.retries < 0:
            raise UsageError(f"retries must be >= 0, got {self.retries}")
        if self.allocator not in ALLOCATOR_MODES:
            raise UsageError(
                f"unknown allocator mode '{self.allocator}' "
                f"(choose one of {', '.join(ALLOCATOR_MODES)})"
            )
        if not 0.0 <= self.max_quarantine_rate <= 1.0:
            raise UsageError("max quarantine rate must lie in [0, 1]")
        if self.src == self.tgt:
            raise UsageError("source and target languages must differ")
        return self

    @property
    def target_locale(self) -> str:
        return self.tgt_locale or self.tgt

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with every non-None override applied (flags win)."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def with_fault_overrides(self, **overrides: Any) -> "RunConfig":
        values = {k: v for k, v in overrides.items() if v is not None}
        if not values:
            return self
        return replace(self, fault=replace(self.fault, **values))

    def redacted(self) -> Dict[str, Any]:
        data = asdict(self)
        return mask_sensitive(data, self.telemetry.sensitive_fields)

    # ------------------------------------------------------------------
    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "RunConfig":
        sections = {"run", "backend", "fault", "telemetry", "markers"}
        unknown = set(data) - sections
        if unknown:
            raise UsageError(f"unknown configuration sections: {', '.join(sorted(unknown))}")

        run = dict(data.get("run", {}))
        if "cache" in run:
            run["cache_path"] = run.pop("cache")

        backend = dict(data.get("backend", {}))
        renames = {"kind": "backend", "url": "mt_url", "token": "mt_token", "timeout": "mt_timeout"}
        for old, new in renames.items():
            if old in backend:
                backend[new] = backend.pop(old)

        config = cls().with_overrides(**run, **backend)

        fault = data.get("fault", {})
        fault_fields = {f.name for f in fields(FaultProfile)}
        unknown_fault = set(fault) - fault_fields
        if unknown_fault:
            raise UsageError(f"unknown fault keys: {', '.join(sorted(unknown_fault))}")
        config = config.with_fault_overrides(**fault)

        telemetry = data.get("telemetry", {})
        telemetry_fields = {f.name for f in fields(TelemetryConfig)}
        unknown_tel = set(telemetry) - telemetry_fields
        if unknown_tel:
            raise UsageError(f"unknown telemetry keys: {', '.join(sorted(unknown_tel))}")
        config = replace(config, telemetry=replace(config.telemetry, **telemetry))

        schemes = data.get("markers", {}).get("schemes", [])
        if schemes:
            config = replace(config, marker_schemes=[dict(s) for s in schemes])
        return config

    @classmethod
    def from_file(cls, path: Optional[str]) -> "RunConfig":
        if not path:
            return cls()
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as e:
            raise UsageError(f"config file {path} is not valid TOML: {e}")
        return cls.from_mapping(data)

"""OpenTelemetry providers and the log, metric and trace managers built on them."""

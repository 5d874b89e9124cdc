"""SOC triage engine: ensemble detection, syntax-constrained SIEM query
generation (SQM), and RAG-grounded incident resolution."""

__version__ = "0.1.0"

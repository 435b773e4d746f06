"""Mean-field limit laboratory: particles, Vlasov grid solver, entropy diagnostics."""

__version__ = "0.1.0"

"""levy-particles - interacting particle EM scheme for McKean-Vlasov SDEs with stable noise."""

__version__ = "1.0.0"

"""Speech emotion recognition with a stacked BiLSTM and CRF head."""

__version__ = "0.1.0"

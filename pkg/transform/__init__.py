"""Camada de transformação - Tipos de amostra, amostragem por proporção e partição."""

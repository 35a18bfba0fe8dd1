"""Camada de análise - Métricas, diagnósticos de distribuição e tabelas de comparação."""

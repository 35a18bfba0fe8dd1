"""Camada de composições - Planos, níveis de preparação, execução e avaliação, e cadeias."""

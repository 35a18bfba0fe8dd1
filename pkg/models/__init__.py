"""Camada de modelos - Arquiteturas, treino (com e sem DP), frotas sombra e visões do modelo."""

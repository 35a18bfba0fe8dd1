"""Camada de ingestão - Gerador sintético de bancada e carregador de conjuntos externos."""

"""Camada de acesso a dados (DAO) - Índice SQLite e armazenamento em disco dos artefatos do pipeline."""

"""Camada de ataques - ADV, MemInf (incluindo LiRA), AttrInf e PropInf isolados."""

"""Federated object store, retrieval and pooling."""

from .federation import (dual_store, knowledge_csv, knowledge_key, load_catalog, manifest_key, model_key,
                         push_demos, demo_key)
from .pooling import (Insufficiency, PooledDataset, Provenance, find_related, pool_for_task,
                      shift_to_target)
from .store import HttpStore, LocalStore, StoreKey, sha256_hex, store_from_env

__all__ = ["HttpStore", "Insufficiency", "LocalStore", "PooledDataset", "Provenance", "StoreKey", "demo_key",
           "dual_store", "find_related", "knowledge_csv", "knowledge_key", "load_catalog", "manifest_key",
           "model_key", "pool_for_task", "push_demos", "sha256_hex", "shift_to_target", "store_from_env"]

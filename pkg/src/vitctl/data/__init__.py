"""Dataset ingestion, synthetic generation, augmentation and patching."""

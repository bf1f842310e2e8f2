// Purpose: on-disk formats — labeled feature CSVs, binary matrix
// checkpoints with a magic/version/shape header, and per-epoch history as
// JSON lines. All writers produce byte-identical output for identical
// inputs; all readers fail loudly with the offending location.
#pragma once

#include <string>

#include "roadmap/train.hpp"

namespace roadmap {

// CSV with header "label,f0,...,f{dim-1}"; one row per sample, the integer
// class label first, then the feature values in full round-trip precision.
void write_dataset_csv(const std::string& path, const Dataset& ds);

// Throws std::runtime_error naming the file and 1-based line of any header
// mismatch, field-count mismatch, or unparsable number.
Dataset read_dataset_csv(const std::string& path);

// Little-endian binary matrix: 16-byte header (magic "RDMP", format version,
// row count, column count as 32-bit words) followed by rows*cols doubles in
// row-major order.
void save_checkpoint(const std::string& path, const EmbeddingMatrix& m);

// Throws std::runtime_error with the byte offset of any truncation, bad
// magic, or unsupported version.
EmbeddingMatrix load_checkpoint(const std::string& path);

// One JSON object per line, one line per epoch record.
void write_history_jsonl(const std::string& path, const TrainHistory& h);

}  // namespace roadmap

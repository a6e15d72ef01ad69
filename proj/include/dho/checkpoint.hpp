#pragma once

#include <string>

#include "dho/codec.hpp"
#include "dho/deform.hpp"
#include "dho/gaussian.hpp"

namespace dho {

// Trained model state: the Gaussian set plus the deformation field and the
// frozen feature codec.
struct Checkpoint {
    GaussianCloud cloud;
    bool has_field = false;
    DeformationField field;
    bool has_codec = false;
    FeatureCodec codec;
};

// Binary container: 4-byte magic, format version, feature_dim, Gaussian count,
// per-Gaussian fields in declared order as little-endian float32, optional
// anchor block, then length-prefixed deformation-field and codec blocks.
// Writes are atomic (temp file + rename).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dho

#pragma once

#include <map>
#include <string>
#include <vector>

#include "tristage/common.hpp"

namespace tristage {

// Single-file parameter archive. Layout (little-endian):
//   magic "TRISTCKP" (8 bytes), u32 schema, u32 reserved, u64 entry count,
//   then per entry: u32 name length, name bytes, u32 dtype code
//   (0=f32, 1=f64, 2=i64, 3=u8), u32 ndim, i64 dims[ndim], u64 byte count,
//   raw tensor bytes.
// Keys are the module tree names (stem.*, leaf1.*, leaf2.*, mfem.*, bem.*,
// mgfm.*, dec1.*); trainer state rides along under opt./rng./meta. prefixes.
inline constexpr uint32_t kCheckpointSchema = 1;

using ArchiveEntries = std::vector<std::pair<std::string, Tensor>>;

void save_archive(const std::string& path, const ArchiveEntries& entries);
std::map<std::string, Tensor> load_archive(const std::string& path);

// Parameters + buffers of a module, optionally with extra entries appended.
void save_model(const std::string& path, torch::nn::Module& module,
                const ArchiveEntries& extra = {});
// Copies archive entries into the module; with strict=true every model tensor
// must be present and shapes must match. Extra archive keys under opt./rng./
// meta. are always ignored here and returned for the caller.
std::map<std::string, Tensor> load_model(const std::string& path, torch::nn::Module& module,
                                         bool strict = true);

// Maps a reference residual-network export (torchvision-style keys conv1.*,
// bn1.*, layer1..layer4) onto stem/leaf1/leaf2; leaf2 is initialized from the
// same stages when share_leaves is set, otherwise left at random init.
void load_reference_backbone(torch::nn::Module& model, const std::string& path, bool share_leaves);

}  // namespace tristage

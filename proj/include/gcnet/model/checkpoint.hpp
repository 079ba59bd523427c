#pragma once

#include "gcnet/model/gcnet.hpp"

#include <filesystem>
#include <iosfwd>

namespace gcnet::model {

struct Checkpoint {
    GCNetConfig config;
    ad::ParamSet params;
};

// JSON-lines container. Line 1:
//   {"format":"gcnet-checkpoint","version":1,
//    "config":{"latent":..,"window":..,"modality_dims":[..],"classes":..,
//              "speakers":..,"dropout":..,"variant":".."},
//    "params":[{"name":"encoder.fwd.w_ih","shape":[48,100]},...]}
// then one {"name":..,"data":[row-major values]} line per parameter, in
// header order. Reading validates every name and shape against the layout
// implied by the config.
void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws unless `params` matches param_layout(config) exactly.
void check_params(const GCNetConfig& config, const ad::ParamSet& params);

} // namespace gcnet::model

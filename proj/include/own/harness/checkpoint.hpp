#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "own/nn/network.hpp"

// Binary, little-endian network snapshot:
//   "OLM1"  u32 layer_count
//   per layer: u32 kind, u64 in_dim, u64 out_dim, u64 group_size, u32 flags,
//              u32 array_count, then array_count × (u64 length, length × f64)
// flags: bit 0 scale, bit 1 eigenbasis transform, bit 2 decay_proxy,
//        bits 8-15 manifold step rule.
// The first array holds layer hyperparameters (ridge coefficient, ridge
// relative flag, batchnorm eps, batchnorm momentum); the rest are the layer's
// state() arrays in order.
namespace own::harness {

std::vector<unsigned char> checkpoint_bytes(nn::Network& net);
// FormatError for a bad magic or inconsistent layer description, LengthError
// for truncation or trailing bytes.
nn::Network parse_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, nn::Network& net);
nn::Network load_checkpoint(const std::filesystem::path& path);

// Inference-only copy: every reparameterized or manifold layer becomes a
// plain linear layer holding its effective weights (with the per-row scale
// kept separate so outputs are bit-identical). Other layers are copied.
nn::Network export_inference(nn::Network& net);

}  // namespace own::harness

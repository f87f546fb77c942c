// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/diff/params.hpp"

namespace xmodal::model {

using diff::ParamBinder;
using diff::ParameterStore;
using diff::Tensor;
using diff::Var;

/// Seed of one parameter's initializer: a hash of its name mixed with the run
/// seed, so adding or removing other parameters never shifts its values.
std::uint64_t parameter_seed(std::string_view name, std::uint64_t seed);

/// Adds `name.weight` (in x out), uniform in +-1/sqrt(in), and a zero
/// `name.bias`.
void init_dense(ParameterStore& store, const std::string& name, std::size_t in,
                std::size_t out, std::uint64_t seed);

/// x @ weight + bias, for a vector or a batch of row vectors.
Var dense(ParamBinder& params, const std::string& name, Var x);

/// Dense layer over [x, cond] where cond is one vector shared by every row
/// of x. The weight is stored whole, (in + cond) x out.
Var dense_conditioned(ParamBinder& params, const std::string& name, Var x, Var cond);

enum class Activation { kRelu, kLeakyRelu, kNone };
Var activate(Var x, Activation act);

/// Layers `name.l0 ... name.l{n-2}` of widths dims[0] -> ... -> dims.back().
void init_mlp(ParameterStore& store, const std::string& name,
              std::span<const std::size_t> dims, std::uint64_t seed);
/// `act` after every layer but the last, which is linear.
Var mlp(ParamBinder& params, const std::string& name, Var x, std::size_t layers,
        Activation act = Activation::kRelu);

/// Standard LSTM cell: `name.weight` is (in + hidden) x 4*hidden with gate
/// blocks ordered input, forget, candidate, output.
void init_lstm(ParameterStore& store, const std::string& name, std::size_t in,
               std::size_t hidden, std::uint64_t seed);

/// Runs from zero hidden and cell state over `steps` (each batch x in) and
/// returns the last hidden state (batch x hidden).
Var lstm(ParamBinder& params, const std::string& name, std::span<const Var> steps);

/// One-hot selection matrix: row r picks column picks[r]; a negative pick
/// gives a zero row.
Tensor selection_matrix(std::span<const int> picks, std::size_t columns);

}  // namespace xmodal::model

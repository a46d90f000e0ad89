// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// {"config": {...}, "theta": ["<17 significant digits>", ...]}

#pragma once

#include <filesystem>
#include <string>

#include "tcv/scorenet/network.hpp"

namespace tcv {

std::string checkpoint_to_json(const ScoreNetwork& network);
ScoreNetwork checkpoint_from_json(const std::string& text);

void save_checkpoint(const ScoreNetwork& network, const std::filesystem::path& path);
ScoreNetwork load_checkpoint(const std::filesystem::path& path);

} // namespace tcv

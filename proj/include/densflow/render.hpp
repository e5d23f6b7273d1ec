// Copyright 2026 The densflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "densflow/flow.hpp"
#include "densflow/io.hpp"

namespace densflow {

// Fixed hash of the id; never black, so background stays distinguishable.
Rgb palette_color(LabelId id);

// Background black, every instance its palette colour.
Grid<Rgb> render_labels(const LabelMap& map);

// Hue = flow angle, saturation = min(1, |flow|), value = prob.
Grid<Rgb> render_field(const FlowField& field);

}  // namespace densflow

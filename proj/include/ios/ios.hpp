// SPDX-License-Identifier: Apache-2.0
//
// iosim - link-level simulation and beamforming for intelligent omni-surfaces
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "beamform.hpp"
#include "chanest.hpp"
#include "channel.hpp"
#include "codebook.hpp"
#include "common.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "element.hpp"
#include "harness.hpp"
#include "multicell.hpp"
#include "pattern.hpp"

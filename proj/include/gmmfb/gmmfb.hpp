// SPDX-License-Identifier: Apache-2.0
//
// gmmfb - GMM-based limited feedback for FDD MIMO systems
// Copyright (C) 2026 The gmmfb Authors
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

#ifndef GMMFB_GMMFB_HPP
#define GMMFB_GMMFB_HPP

#include "gmmfb/core.hpp"
#include "gmmfb/channel_model.hpp"
#include "gmmfb/pilot_system.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/estimators.hpp"
#include "gmmfb/codebooks.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/precoding.hpp"
#include "gmmfb/io.hpp"
#include "gmmfb/harness.hpp"
#include "gmmfb/config.hpp"

#endif  // GMMFB_GMMFB_HPP

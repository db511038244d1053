// Copyright 2026 The vedit Authors.
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

#include <cstring>

#include <gtest/gtest.h>

#include "support/testing.hpp"
#include "vedit/blend.hpp"

namespace vedit {
namespace {

using testing::Gen;

bool bit_equal(const LatentGrid& a, const LatentGrid& b) {
  return a.size() == b.size() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

TEST(InWindow, Examples) {
  const InjectionWindow def;
  EXPECT_FALSE(in_window(0.0, def));
  EXPECT_TRUE(in_window(0.2, def));
  EXPECT_TRUE(in_window(1.0, def));
  EXPECT_FALSE(in_window(0.5, InjectionWindow{0.6, 1.0}));
}

TEST(InjectBackground, FullMaskKeepsEdit) {
  Gen g(1);
  const LatentGrid e = g.latent(4, 6, 5), s = g.latent(4, 6, 5);
  EXPECT_TRUE(bit_equal(inject_background(e, s, BinaryMask(6, 5, true), 0.5, {}), e));
}

TEST(InjectBackground, EmptyMaskGivesSource) {
  Gen g(2);
  const LatentGrid e = g.latent(4, 6, 5), s = g.latent(4, 6, 5);
  EXPECT_TRUE(bit_equal(inject_background(e, s, BinaryMask(6, 5), 0.5, {}), s));
}

TEST(InjectBackground, ScalarHalfMask) {
  const LatentGrid e(1, 2, 2, 2.0f), s(1, 2, 2, 0.0f);
  BinaryMask m(2, 2);
  m.set(0, 0);
  m.set(1, 1);
  const LatentGrid out = inject_background(e, s, m, 1.0, {});
  EXPECT_EQ(out.at(0, 0, 0), 2.0f);
  EXPECT_EQ(out.at(0, 0, 1), 0.0f);
  EXPECT_EQ(out.at(0, 1, 0), 0.0f);
  EXPECT_EQ(out.at(0, 1, 1), 2.0f);
}

TEST(InjectBackground, Errors) {
  const LatentGrid e(2, 3, 3), s(2, 3, 3), other(2, 3, 4);
  EXPECT_THROW(inject_background(e, other, BinaryMask(3, 3), 0.5, {}), ShapeError);
  EXPECT_THROW(inject_background(e, s, BinaryMask(3, 4), 0.5, {}), ShapeError);
  EXPECT_THROW(inject_background(e, s, BinaryMask(3, 3), 0.5, {0.7, 0.3}), ValidationError);
}

TEST(InjectBackgroundProperty, PreservationIdentityIdempotence) {
  Gen g(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t c = g.size(1, 4), h = g.size(1, 9), w = g.size(1, 9);
    const LatentGrid e = g.latent(c, h, w), s = g.latent(c, h, w);
    const BinaryMask m = g.mask(h, w, g.real(0.0, 1.0));
    const double a = g.real(0.0, 1.0), b = g.real(0.0, 1.0);
    const InjectionWindow win{std::min(a, b), std::max(a, b)};
    const double pos = g.real(0.0, 1.0);
    const LatentGrid out = inject_background(e, s, m, pos, win);
    if (!in_window(pos, win)) {
      ASSERT_TRUE(bit_equal(out, e));
    } else {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const float expect = m.at(y, x) ? e.at(ch, y, x) : s.at(ch, y, x);
            const float got = out.at(ch, y, x);
            ASSERT_EQ(std::memcmp(&expect, &got, sizeof(float)), 0);
          }
        }
      }
    }
    ASSERT_TRUE(bit_equal(inject_background(out, s, m, pos, win), out));
  }
}

}  // namespace
}  // namespace vedit

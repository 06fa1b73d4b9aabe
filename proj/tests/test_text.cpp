/*
 * Copyright 2026 The nlq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "nlq/text.hpp"

namespace nlq {
namespace {

using Tokens = std::vector<std::string>;

TEST(Text, TokenizeDetachesPunctuation) {
  EXPECT_EQ(tokenize_sentence("From publication, give abstracttext, pages?"),
            (Tokens{"from", "publication", ",", "give", "abstracttext", ",", "pages", "?"}));
}

TEST(Text, TokenizeKeepsOperatorsAndDecimals) {
  EXPECT_EQ(tokenize_sentence("score != 12.5 ; length <= 3."),
            (Tokens{"score", "!=", "12.5", ";", "length", "<=", "3", "."}));
  EXPECT_EQ(tokenize_sentence("x = ."), (Tokens{"x", "=", "."}));
}

TEST(Text, SplitAndJoin) {
  EXPECT_EQ(split("a\tb\t", '\t'), (Tokens{"a", "b", ""}));
  EXPECT_EQ(join({"a", "b", "c"}, " ; "), "a ; b ; c");
  EXPECT_EQ(split_whitespace("  a \t b\n"), (Tokens{"a", "b"}));
  EXPECT_EQ(trim("  x y \n"), "x y");
}

TEST(Text, NumberRecognition) {
  EXPECT_TRUE(is_number("42"));
  EXPECT_TRUE(is_number("-3.25"));
  EXPECT_FALSE(is_number("3e"));
  EXPECT_FALSE(is_number(""));
  EXPECT_FALSE(is_number("abc"));
}

}  // namespace
}  // namespace nlq

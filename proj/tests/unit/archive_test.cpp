#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fdi/archive.hpp"
#include "oracle.hpp"
#include "temp_dir.hpp"

namespace fdi {
namespace {

using testing_support::TempDir;

TEST(Archive, RoundTripIsExact) {
  std::mt19937_64 rng(4);
  Dataset d = oracle::random_dataset(rng, 25, 40, false, 0.3);
  // Weights that need all 17 significant digits.
  std::vector<SparseProfile> profiles(d.profiles().begin(), d.profiles().end());
  profiles.emplace_back("zz", std::vector<Entry>{{0, 0.1 + 0.2}, {3, 1.0 / 3.0}});
  d = Dataset(d.space_ptr(), std::move(profiles), Role::kTarget);

  TempDir dir;
  const auto path = dir.path() / "d.fdi";
  archive::save(path, d);
  const Dataset back = archive::read(path);
  EXPECT_TRUE(equivalent(d, back));
  EXPECT_EQ(back.space(), d.space());
  EXPECT_EQ(back.role(), Role::kTarget);
}

TEST(Archive, ByteIdenticalRewrites) {
  std::mt19937_64 rng(8);
  const Dataset d = oracle::random_dataset(rng, 10, 10, true);
  std::ostringstream a, b;
  archive::write(a, d);
  archive::write(b, d);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Archive, KeepsEmptyUsers) {
  const Dataset d = build_dataset(std::vector<Edge>{{"a", "x", 1}, {"b", "", 0}}, Role::kTraining);
  TempDir dir;
  archive::save(dir.path() / "d.fdi", d);
  const Dataset back = archive::read(dir.path() / "d.fdi");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back.find("b")->empty());
}

TEST(Archive, RejectsGarbage) {
  TempDir dir;
  const auto bad = dir.write("bad.fdi", "something else\n");
  try {
    archive::read(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kParseError);
  }
  const auto truncated = dir.write("t.fdi", "fdi-dataset 1\nrole training\nfeatures 2\nx\n");
  EXPECT_THROW(archive::read(truncated), Error);
}

TEST(Archive, RejectsTabInUserId) {
  auto space = std::make_shared<const FeatureSpace>(std::vector<std::string>{"x"});
  const Dataset d(space, {SparseProfile("a\tb", {{0, 1}})}, Role::kTraining);
  std::ostringstream out;
  EXPECT_THROW(archive::write(out, d), Error);
}

}  // namespace
}  // namespace fdi

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "action4d/error.hpp"
#include "action4d/geometry.hpp"

using namespace action4d;

namespace {

Camera unit_camera(int w = 1, int h = 1) {
  Camera c;
  c.name = "unit";
  c.width = w;
  c.height = h;
  return c;
}

}  // namespace

TEST(Project, IdentityCameraAlongAxis) {
  const Projection p = project(Vec3(0, 0, 2), unit_camera());
  EXPECT_DOUBLE_EQ(p.pixel.x(), 0.0);
  EXPECT_DOUBLE_EQ(p.pixel.y(), 0.0);
  EXPECT_DOUBLE_EQ(p.cam_depth, 2.0);
  EXPECT_TRUE(p.in_fov);
}

TEST(Project, BehindCameraIsOutOfView) {
  EXPECT_FALSE(project(Vec3(0, 0, -1), unit_camera()).in_fov);
  EXPECT_FALSE(project(Vec3(0.1, 0, 0), unit_camera()).in_fov);
}

TEST(Project, RoundTripsThroughUnproject) {
  const Camera cam = look_at("c", Vec3(3, -2, 2.5), Vec3(0, 0, 1), 320, 240, 60.0, 0.3, 10.0);
  for (double u : {0.0, 17.3, 160.0, 319.0})
    for (double v : {0.0, 99.5, 239.0}) {
      const Vec3 w = unproject(u, v, 2.75, cam);
      const Projection p = project(w, cam);
      EXPECT_NEAR(p.pixel.x(), u, 1e-9);
      EXPECT_NEAR(p.pixel.y(), v, 1e-9);
      EXPECT_NEAR(p.cam_depth, 2.75, 1e-12);
    }
}

TEST(Project, PixelIndexUsesHalfUpRounding) {
  Camera cam = unit_camera(4, 4);
  Projection p;
  p.in_fov = true;
  p.pixel = Vec2(1.5, 2.49);
  EXPECT_EQ(pixel_index(p, cam), std::optional<std::size_t>(2 * 4 + 2));
  p.pixel = Vec2(3.6, 0.0);
  EXPECT_FALSE(pixel_index(p, cam).has_value());
}

TEST(Camera, LookAtIsOrthonormalAndAimed) {
  const Camera cam = look_at("c", Vec3(5, 0, 4), Vec3(0, 0, 1), 256, 212, 70.0, 0.4, 20.0);
  EXPECT_NO_THROW(cam.validate());
  EXPECT_NEAR((cam.center() - Vec3(5, 0, 4)).norm(), 0.0, 1e-12);
  const Projection p = project(Vec3(0, 0, 1), cam);
  EXPECT_NEAR(p.pixel.x(), 127.5, 1e-9);
  EXPECT_NEAR(p.pixel.y(), 105.5, 1e-9);
}

TEST(Camera, ValidateRejectsBadRotation) {
  Camera cam = unit_camera();
  cam.rotation(0, 0) = 2.0;
  EXPECT_THROW(cam.validate(), ConfigError);
  cam = unit_camera();
  cam.min_depth = 5.0;
  cam.max_depth = 1.0;
  EXPECT_THROW(cam.validate(), ConfigError);
}

TEST(Calibration, RoundTrip) {
  const auto rig = ring_rig(3, Vec3::Zero(), 4.0, 3.0, Vec3(0, 0, 1), 64, 48, 70.0);
  const auto back = parse_calibration(format_calibration(rig));
  ASSERT_EQ(back.size(), rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    EXPECT_EQ(back[i].name, rig[i].name);
    EXPECT_TRUE(back[i].rotation.isApprox(rig[i].rotation, 1e-12));
    EXPECT_TRUE(back[i].translation.isApprox(rig[i].translation, 1e-12));
    EXPECT_EQ(back[i].width, 64);
  }
}

TEST(Calibration, MalformedIsConfigError) {
  EXPECT_THROW(parse_calibration("{"), ConfigError);
  EXPECT_THROW(parse_calibration(R"({"cameras": [{"name": "a"}]})"), ConfigError);
}

TEST(DepthFile, TruncatesToMillimetres) {
  DepthImage img(3, 2);
  img.at(0, 0) = 1.2345f;
  img.at(2, 1) = 0.0f;
  img.at(1, 1) = 7.0f;
  const auto path = std::filesystem::temp_directory_path() / "a4d_depth_test.d16";
  write_depth_d16(path, img);
  const DepthImage back = read_depth_d16(path, 3, 2);
  EXPECT_FLOAT_EQ(back.at(0, 0), 1.234f);
  EXPECT_LE(back.at(0, 0), img.at(0, 0));
  EXPECT_FLOAT_EQ(back.at(1, 1), 7.0f);
  EXPECT_EQ(back.at(2, 1), 0.0f);
  EXPECT_THROW(read_depth_d16(path, 4, 2), DataError);
  EXPECT_THROW(read_depth_d16(path.string() + ".missing", 3, 2), DataError);
  std::filesystem::remove(path);
}

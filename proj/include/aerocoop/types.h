#ifndef AEROCOOP_TYPES_H_
#define AEROCOOP_TYPES_H_

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aerocoop {

enum class ObjectClass { kCar = 0, kTruck = 1, kBus = 2, kPedestrian = 3 };
inline constexpr int kNumClasses = 4;
inline constexpr std::array<ObjectClass, kNumClasses> kAllClasses = {
    ObjectClass::kCar, ObjectClass::kTruck, ObjectClass::kBus,
    ObjectClass::kPedestrian};

std::string_view class_name(ObjectClass c);
std::optional<ObjectClass> parse_class(std::string_view name);

enum class Domain { kGround, kAerial };
std::string_view domain_name(Domain d);

// Per-pixel and per-cell feature layout shared by the renderer, the BEV
// lift, the fusion stage and the decoder.
namespace channel {
inline constexpr int kClassBegin = 0;  // one-hot, kNumClasses channels
inline constexpr int kOffsetX = 4;     // object center minus surface point (m)
inline constexpr int kOffsetY = 5;
inline constexpr int kLogLength = 6;
inline constexpr int kLogWidth = 7;
inline constexpr int kLogHeight = 8;
inline constexpr int kSinYaw = 9;
inline constexpr int kCosYaw = 10;
inline constexpr int kVelX = 11;
inline constexpr int kVelY = 12;
inline constexpr int kCount = 13;
}  // namespace channel

// Thrown when a generator cannot satisfy a requested object count.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aerocoop

#endif  // AEROCOOP_TYPES_H_

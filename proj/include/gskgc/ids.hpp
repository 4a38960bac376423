#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace gskgc {

/// Dense integer handle into one of the graph vocabularies. The tag keeps
/// entity, relation and timestamp handles from mixing.
template <typename Tag>
class Id {
 public:
  using value_type = std::uint32_t;

  constexpr Id() = default;
  constexpr explicit Id(value_type v) : value_(v) {}

  [[nodiscard]] constexpr value_type value() const { return value_; }

  constexpr auto operator<=>(const Id&) const = default;

 private:
  value_type value_ = 0;
};

using EntityId = Id<struct EntityTag>;
using RelationId = Id<struct RelationTag>;
using TimeId = Id<struct TimeTag>;

}  // namespace gskgc

template <typename Tag>
struct std::hash<gskgc::Id<Tag>> {
  std::size_t operator()(const gskgc::Id<Tag>& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value());
  }
};

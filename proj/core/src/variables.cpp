#include "loopcert/poly/variables.hpp"

#include <sstream>

namespace loopcert {

int VariableSpace::add_block(const std::string& name, int dimension) {
  if (dimension < 1) {
    throw StructuralError("block '" + name + "' must have dimension >= 1, got " +
                          std::to_string(dimension));
  }
  if (has_block(name)) {
    throw StructuralError("duplicate block name '" + name + "'");
  }
  blocks_.push_back(VariableBlock{name, dimension});
  return static_cast<int>(blocks_.size()) - 1;
}

std::optional<int> VariableSpace::find_block(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) {
    if (blocks_[i].name == name) return i;
  }
  return std::nullopt;
}

int VariableSpace::block_index(const std::string& name) const {
  auto idx = find_block(name);
  if (!idx) throw StructuralError("unknown block '" + name + "'");
  return *idx;
}

int VariableSpace::total_dimension() const {
  int n = 0;
  for (const auto& b : blocks_) n += b.dimension;
  return n;
}

bool VariableSpace::same_content(const VariableSpace& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name != other.blocks_[i].name ||
        blocks_[i].dimension != other.blocks_[i].dimension)
      return false;
  }
  return true;
}

SpacePtr make_space(const std::vector<std::pair<std::string, int>>& blocks) {
  auto space = std::make_shared<VariableSpace>();
  for (const auto& [name, dim] : blocks) {
    if (dim == 0) continue;
    space->add_block(name, dim);
  }
  return space;
}

void check_var(const VariableSpace& space, VarRef v) {
  if (v.block < 0 || v.block >= space.block_count())
    throw StructuralError("variable block index " + std::to_string(v.block) +
                          " out of range");
  if (v.index < 0 || v.index >= space.block(v.block).dimension)
    throw StructuralError("variable index " + std::to_string(v.index) +
                          " out of range for block '" + space.block(v.block).name + "'");
}

std::string var_name(const VariableSpace& space, VarRef v) {
  std::ostringstream os;
  os << space.block(v.block).name << "[" << (v.index + 1) << "]";
  return os.str();
}

void Point::set(const std::string& block, Eigen::VectorXd values) {
  set(space_->block_index(block), std::move(values));
}

void Point::set(int block_index, Eigen::VectorXd values) {
  if (block_index < 0 || block_index >= space_->block_count())
    throw StructuralError("block index out of range in Point::set");
  if (values.size() != space_->block(block_index).dimension)
    throw StructuralError("wrong vector length for block '" +
                          space_->block(block_index).name + "'");
  values_[block_index] = std::move(values);
}

bool Point::has(int block_index) const { return values_.count(block_index) > 0; }

const Eigen::VectorXd& Point::get(int block_index) const {
  auto it = values_.find(block_index);
  if (it == values_.end())
    throw StructuralError("block '" + space_->block(block_index).name +
                          "' not assigned in point");
  return it->second;
}

double Point::value(VarRef v) const {
  auto it = values_.find(v.block);
  if (it == values_.end())
    throw StructuralError("variable " + var_name(*space_, v) +
                          " has no assignment in point");
  return it->second(v.index);
}

void Point::merge(const Point& other) {
  for (const auto& [idx, vals] : other.values_) values_[idx] = vals;
}

}  // namespace loopcert

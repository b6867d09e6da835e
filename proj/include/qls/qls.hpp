#pragma once

#include <qls/errors.hpp>
#include <qls/hamiltonian.hpp>
#include <qls/io.hpp>
#include <qls/levelset/contour.hpp>
#include <qls/levelset/follow.hpp>
#include <qls/levelset/mesh.hpp>
#include <qls/oct.hpp>
#include <qls/operators.hpp>
#include <qls/propagator.hpp>
#include <qls/tracking.hpp>

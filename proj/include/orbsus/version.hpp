#pragma once

#define ORBSUS_VERSION "0.1.0"
